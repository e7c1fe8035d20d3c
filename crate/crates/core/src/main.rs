fn main() {
    std::process::exit(grza_vp::harness::cli::cli_main(std::env::args_os()));
}
