//! Argument handling and drivers for the `fft_matvec` and `sbgemv_bench`
//! binaries.
//!
//! Both tools take single-dash long flags (`-nm 50`, `-raw`). They are
//! rewritten to clap's `--` form before parsing; see [`normalize_args`].

use std::io::Write;

pub mod bench;
pub mod matvec;

/// Exit status for invalid arguments.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for I/O and runtime failures.
pub const EXIT_FAILURE: i32 = 1;

/// Rewrites `-name` to `--name` for every name in `long`.
///
/// Single-letter flags and values (including negative numbers) pass
/// through untouched, as does everything after a bare `--`.
pub fn normalize_args<I, S>(args: I, long: &[&str]) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut done = false;
    args.into_iter()
        .map(Into::into)
        .map(|a| {
            if done {
                return a;
            }
            if a == "--" {
                done = true;
                return a;
            }
            match a.strip_prefix('-') {
                Some(rest) if !rest.starts_with('-') => {
                    let name = rest.split_once('=').map_or(rest, |(n, _)| n);
                    if long.contains(&name) {
                        format!("-{a}")
                    } else {
                        a
                    }
                }
                _ => a,
            }
        })
        .collect()
}

/// Prints a clap error and maps it to an exit status. Help and version
/// requests succeed.
pub(crate) fn clap_exit(e: clap::Error, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    use clap::error::ErrorKind;
    let text = e.render().to_string();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = write!(out, "{text}");
            0
        }
        _ => {
            let _ = write!(err, "{text}");
            EXIT_USAGE
        }
    }
}
