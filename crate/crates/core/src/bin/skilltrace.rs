fn main() {
    std::process::exit(skilltrace::cli::run(std::env::args_os()));
}
