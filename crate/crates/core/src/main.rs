fn main() {
    std::process::exit(photon_denoise::cli::run(std::env::args_os()));
}
