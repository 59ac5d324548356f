use std::process::exit;

/// Die quietly when a downstream pipe closes (`markov-dsep ... | head`)
/// instead of panicking on the failed write, like any other Unix filter.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() {
    reset_sigpipe();
    exit(markov_dsep::cli::run(std::env::args()));
}
