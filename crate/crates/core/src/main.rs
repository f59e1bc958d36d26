fn main() {
    std::process::exit(wfpd::cli::run(std::env::args_os()));
}
