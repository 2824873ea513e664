use std::process::ExitCode;

fn main() -> ExitCode {
    macc_sim::cli::main()
}
