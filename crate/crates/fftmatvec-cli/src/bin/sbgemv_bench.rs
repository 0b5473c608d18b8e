fn main() {
    let mut input = std::io::stdin().lock();
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    std::process::exit(fftmatvec_cli::bench::main_with(std::env::args(), &mut input, &mut out, &mut err));
}
