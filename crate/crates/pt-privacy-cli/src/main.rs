fn main() {
    std::process::exit(pt_privacy_cli::run());
}
