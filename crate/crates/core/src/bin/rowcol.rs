fn main() -> std::process::ExitCode {
    rowcol::cli::main_with_args(std::env::args_os())
}
