fn main() {
    std::process::exit(vitali_tf::harness::run_cli(std::env::args_os()));
}
