fn main() {
    std::process::exit(fairkit::run(std::env::args_os()));
}
