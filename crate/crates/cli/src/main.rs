use clap::Parser;
use qbrown::{Cli, EXIT_OK, EXIT_VALIDATION};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own usage exit code (2) would collide with contract violations
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(qbrown::run(&cli));
}
