fn main() {
    std::process::exit(flowatlas::cli::run(std::env::args_os()));
}
