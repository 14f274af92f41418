fn main() {
    std::process::exit(privarch::cli::run(std::env::args_os()));
}
