fn main() {
    std::process::exit(skewmix::run(std::env::args_os()));
}
