//! CSV results and headless plotting scripts.

use super::experiment::ResultRow;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("no result rows to write")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// CSV text for `rows`; the header is the [`ResultRow`] field names in order.
pub fn to_csv_string(rows: &[ResultRow]) -> Result<String, OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(csv_err(Path::new("<memory>")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| io_err(Path::new("<memory>"))(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), OutputError> {
    let text = to_csv_string(rows)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, OutputError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(csv_err(path))
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Renders the companion CSV to a PNG without a display.
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "__DATA__")
OUT = os.path.join(HERE, "__PNG__")


def num(v):
    return float(v) if v not in ("", None) else None


def series(rows, x, y):
    pts = [(num(r[x]), num(r[y])) for r in rows if num(r[x]) is not None and num(r[y]) is not None]
    pts.sort()
    return [p[0] for p in pts], [p[1] for p in pts]


rows = list(csv.DictReader(open(DATA)))
if not rows:
    sys.exit("no rows")
kind = rows[0]["kind"]
fig, ax = plt.subplots(figsize=(6, 4.5))
if kind == "nmse-model":
    for v in sorted({r["velocity_kmh"] for r in rows}, key=float):
        sub = [r for r in rows if r["velocity_kmh"] == v]
        ax.semilogy(*series(sub, "m", "nmse_model"), "o-", label=f"v = {float(v):g} km/h")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("M")
    ax.set_ylabel("NMSE (squint ignored, perfect parameters)")
elif kind in ("estimate", "ber"):
    if kind == "estimate":
        cols = [("nmse_model", "model mismatch"), ("nmse_est_dse", "estimated, squint-aware"),
                ("nmse_est_nodse", "estimated, squint-ignorant")]
        ax.set_ylabel("NMSE")
    else:
        cols = [("ber_perfect_dse", "perfect CSI, squint-aware"), ("ber_perfect_nodse", "perfect CSI, squint-ignorant"),
                ("ber_est_dse", "estimated, squint-aware"), ("ber_est_nodse", "estimated, squint-ignorant")]
        ax.set_ylabel("BER")
    for v in sorted({r["velocity_kmh"] for r in rows}, key=float):
        sub = [r for r in rows if r["velocity_kmh"] == v]
        for col, label in cols:
            xs, ys = series(sub, "snr_db", col)
            ys = [max(y, 1e-7) for y in ys]
            ax.semilogy(xs, ys, "o-", label=f"{label} ({float(v):g} km/h)")
    ax.set_xlabel("SNR (dB)")
else:
    xs = list(range(len(rows)))
    ax.bar(xs, [num(r["oracle_max_rel_err"]) or 0.0 for r in rows])
    ax.set_yscale("log")
    ax.set_xlabel("sweep point")
    ax.set_ylabel("max relative deviation")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(OUT, dpi=150)
print(OUT)
"#;

/// Writes a Python/matplotlib script at `path` and its data next to it as
/// `<stem>_data.csv`. Returns the data path. The script uses the Agg backend
/// and writes `<stem>.png`.
pub fn emit_plot_script(rows: &[ResultRow], path: &Path) -> Result<PathBuf, OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into());
    let data_name = format!("{stem}_data.csv");
    let data_path = path.with_file_name(&data_name);
    emit_csv(rows, &data_path)?;
    let script = PLOT_SCRIPT
        .replace("__DATA__", &data_name)
        .replace("__PNG__", &format!("{stem}.png"));
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(script.as_bytes()).map_err(io_err(path))?;
    Ok(data_path)
}
