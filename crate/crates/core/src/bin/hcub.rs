fn main() {
    std::process::exit(hcub::harness::run_cli(std::env::args_os()));
}
