use clap::Parser;
use supex::cli::{run, Cli};
use supex::Error;

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Schema { .. } => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
