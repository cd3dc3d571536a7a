use std::process::ExitCode;

fn main() -> ExitCode {
    mlgw_cli::init_logging();
    match mlgw_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
