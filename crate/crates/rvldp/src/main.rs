fn main() {
    std::process::exit(rvldp::cli::run(std::env::args_os()));
}
