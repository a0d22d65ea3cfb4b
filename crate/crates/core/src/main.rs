fn main() {
    std::process::exit(mmdkl::cli::run_from_args(std::env::args_os()));
}
