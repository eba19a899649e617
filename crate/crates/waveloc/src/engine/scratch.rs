//! Isolated temp space for the worker pool.
//!
//! Layout: `<temp root>/wvl-run-<pid>-<n>/worker-<id>/w<id>-<name>`. The run
//! directory is removed on drop; directories left behind by a crashed
//! process are purged the next time a run starts in the same temp root,
//! once their owning pid is verifiably gone.

use std::fs;
use std::path::{Path, PathBuf};
use std::process;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

const RUN_PREFIX: &str = "wvl-run-";

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

#[cfg(target_os = "linux")]
fn pid_alive(pid: u32) -> bool {
    Path::new("/proc").join(pid.to_string()).exists()
}

/// Without a reliable liveness probe, never purge someone else's scratch.
#[cfg(not(target_os = "linux"))]
fn pid_alive(_pid: u32) -> bool {
    true
}

fn purge_stale(root: &Path) {
    let entries = match fs::read_dir(root) {
        Ok(e) => e,
        Err(_) => return,
    };
    let own = process::id();
    for entry in entries.flatten() {
        let name = entry.file_name();
        let Some(rest) = name.to_str().and_then(|n| n.strip_prefix(RUN_PREFIX)) else {
            continue;
        };
        let Some(pid) = rest
            .split('-')
            .next()
            .and_then(|p| p.parse::<u32>().ok())
        else {
            continue;
        };
        if pid != own && !pid_alive(pid) {
            // best effort; a parallel run may have won the race
            let _ = fs::remove_dir_all(entry.path());
        }
    }
}

/// One run's private directory tree under a temp root.
#[derive(Debug)]
pub struct ScratchRoot {
    run_dir: PathBuf,
}

impl ScratchRoot {
    /// Claim a fresh run directory, purging stale ones first. `temp_root`
    /// defaults to the system temp dir; it must be creatable and writable.
    pub fn create(temp_root: Option<&Path>) -> Result<ScratchRoot> {
        let root = temp_root
            .map(Path::to_path_buf)
            .unwrap_or_else(std::env::temp_dir);
        fs::create_dir_all(&root)
            .map_err(|e| Error::Config(format!("scratch root {}: {e}", root.display())))?;
        purge_stale(&root);
        let pid = process::id();
        loop {
            let n = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
            let run_dir = root.join(format!("{RUN_PREFIX}{pid}-{n}"));
            match fs::create_dir(&run_dir) {
                Ok(()) => return Ok(ScratchRoot { run_dir }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => {
                    return Err(Error::Config(format!(
                        "scratch dir {}: {e}",
                        run_dir.display()
                    )))
                }
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.run_dir
    }

    /// Allocate one worker's private directory.
    pub fn worker(&self, id: usize) -> Result<WorkerScratch> {
        let dir = self.run_dir.join(format!("worker-{id}"));
        fs::create_dir_all(&dir)?;
        Ok(WorkerScratch { dir, id })
    }
}

impl Drop for ScratchRoot {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.run_dir);
    }
}

/// A single worker's directory; every file it creates carries the worker-id
/// prefix, so merged listings stay attributable.
#[derive(Debug, Clone)]
pub struct WorkerScratch {
    dir: PathBuf,
    id: usize,
}

impl WorkerScratch {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(format!("w{}-{name}", self.id))
    }
}
