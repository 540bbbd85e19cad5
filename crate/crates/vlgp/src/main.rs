use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match vlgp::cli::parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err((e, help)) => {
            if help {
                // clap's help and version text
                if let vlgp::CliError::Config(text) = e {
                    print!("{text}");
                }
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match vlgp::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vlgp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
