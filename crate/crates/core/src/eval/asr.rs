use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;

use crate::corpus::EntryError;

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

fn run_one(template: &str, audio: &Path) -> Result<String, String> {
    let cmd = template.replace("{audio}", &shell_quote(audio));
    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "{}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    let text = String::from_utf8(out.stdout).map_err(|_| "stdout is not UTF-8".to_string())?;
    // one hypothesis per file; flatten multi-line engine output
    Ok(text.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Runs an external recognizer once per audio file. `{audio}` in the template
/// is replaced by the shell-quoted path and stdout becomes the hypothesis.
/// Failures are collected per item; at most `jobs` commands run at once.
pub fn transcribe_with_command(
    template: &str,
    items: &[(String, PathBuf)],
    jobs: usize,
) -> (Vec<(String, String)>, Vec<EntryError>) {
    let work = || -> Vec<_> {
        items
            .par_iter()
            .map(|(id, path)| {
                run_one(template, path)
                    .map(|h| (id.clone(), h))
                    .map_err(|message| EntryError { id: id.clone(), message })
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    let mut hyps = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(h) => hyps.push(h),
            Err(e) => errors.push(e),
        }
    }
    (hyps, errors)
}
