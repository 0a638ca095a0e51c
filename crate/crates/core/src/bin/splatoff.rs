fn main() -> std::process::ExitCode {
    splatoff::cli::run()
}
