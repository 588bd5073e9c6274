//! Subcommand implementations.

mod analyze_text;
mod backtest;
mod compare;
mod optimize;
mod validate;

pub use analyze_text::cmd_analyze_text;
pub use backtest::cmd_backtest;
pub use compare::cmd_compare;
pub use optimize::cmd_optimize;
pub use validate::cmd_validate;

use std::path::{Path, PathBuf};

/// Recursively collect files whose name matches `predicate`, sorted for
/// deterministic processing order.
pub(crate) fn collect_files(
    root: &Path,
    predicate: &dyn Fn(&Path) -> bool,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", dir.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if predicate(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
