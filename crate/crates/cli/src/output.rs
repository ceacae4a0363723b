//! Output-file helpers: atomic writes and the CSV/JSON emitters shared by
//! the commands. All primary files are byte-deterministic for a fixed seed;
//! wall-clock fields live only in metadata.json.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use zvgarch::model::DistKind;
use zvgarch::samplers::ChainSample;
use zvgarch::zv::ParamSummary;

use crate::CliError;

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = PathBuf::from(dir);
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("invalid output path {}", path.display())))?;
    tmp.push(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Posterior summary table in the paper's layout, 5 decimal places.
pub fn summary_table(summaries: &[ParamSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "parameter", "raw", "SE", "ZV-L", "SE", "ZV-Q", "SE"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:>9} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            s.name,
            s.estimate.raw.mean,
            s.estimate.raw.se,
            s.estimate.linear.mean,
            s.estimate.linear.se,
            s.estimate.quadratic.mean,
            s.estimate.quadratic.se
        );
    }
    out
}

pub fn summary_csv(summaries: &[ParamSummary]) -> String {
    let mut out = String::from(
        "parameter,raw_mean,raw_se,zv_linear_mean,zv_linear_se,zv_quadratic_mean,zv_quadratic_se\n",
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5}",
            s.name,
            s.estimate.raw.mean,
            s.estimate.raw.se,
            s.estimate.linear.mean,
            s.estimate.linear.se,
            s.estimate.quadratic.mean,
            s.estimate.quadratic.se
        );
    }
    out
}

pub fn criteria_csv(rep: &zvgarch::criteria::CriteriaReport) -> String {
    let mut out = String::from("criterion,value\n");
    for (name, value) in [
        ("dic", rep.dic),
        ("eaic", rep.eaic),
        ("ebic", rep.ebic),
        ("waic", rep.waic),
        ("looic", rep.looic),
        ("p_d", rep.p_d),
        ("p_waic", rep.p_waic),
        ("p_loo", rep.p_loo),
        ("max_tail_k", rep.max_tail_k),
    ] {
        let _ = writeln!(out, "{name},{value:.5}");
    }
    out
}

/// Chain file: natural-space parameters and log-posterior per draw, full
/// round-trip precision so `diagnose` can rebuild the draws exactly.
pub fn chain_csv(chain: &ChainSample, kind: DistKind) -> String {
    let natural = zvgarch::zv::natural_draws(chain, kind);
    let mut out = String::from("draw");
    for name in kind.param_names() {
        let _ = write!(out, ",{name}");
    }
    out.push_str(",log_posterior\n");
    for l in 0..chain.n_draws() {
        let _ = write!(out, "{l}");
        for j in 0..natural.ncols() {
            let _ = write!(out, ",{}", natural[(l, j)]);
        }
        let _ = writeln!(out, ",{}", chain.log_posterior[l]);
    }
    out
}

pub fn sha256_hex(series: &[f64]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for v in series {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
