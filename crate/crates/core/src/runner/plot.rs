//! Columnar plot data extracted from a finished run directory.
//!
//! Output files are whitespace-separated columns preceded by `#` comment
//! lines naming the quantity, its source and the columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{DIAGNOSTICS_FILE, PROFILES_FILE, SNAPSHOT_DIR};
use crate::error::{Error, Result};
use crate::snapshot;

pub const PLOT_DIR: &str = "plot";

/// Spatial quantities read from `profiles.csv`, by column.
const PROFILE_QUANTITIES: [(&str, &str); 5] = [
    ("rho_xt", "rho"),
    ("e1_xt", "E1"),
    ("e2_xt", "E2"),
    ("b_xt", "B"),
    ("a_xt", "A"),
];

/// Writes `quantity` from `run_dir` to `run_dir/plot/<quantity>.dat` and
/// returns the path.
///
/// Known quantities: every diagnostics column, `total_energy`,
/// `seps_sup:<eps>`, the `(t, x, value)` triples `rho_xt`, `e1_xt`,
/// `e2_xt`, `b_xt`, `a_xt`, and `marginal_v2`, the `(t, x, v1, ∫f dv2)`
/// marginal from the snapshots.
pub fn emit_plot_data(run_dir: &Path, quantity: &str) -> Result<PathBuf> {
    let body = if let Some((_, column)) = PROFILE_QUANTITIES.iter().find(|(q, _)| *q == quantity) {
        spatial(run_dir, quantity, column)?
    } else if quantity == "marginal_v2" {
        marginal(run_dir)?
    } else {
        series(run_dir, quantity)?
    };
    let dir = run_dir.join(PLOT_DIR);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.dat", quantity.replace(':', "_")));
    std::fs::write(&path, body)?;
    Ok(path)
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        let mut lines = text.lines();
        let columns = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?
            .split(',')
            .map(str::to_string)
            .collect::<Vec<_>>();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn header(quantity: &str, source: &str, columns: &str) -> String {
    format!("# quantity: {quantity}\n# source: {source}\n# columns: {columns}\n")
}

fn series(run_dir: &Path, quantity: &str) -> Result<String> {
    let table = Table::read(&run_dir.join(DIAGNOSTICS_FILE))?;
    let unknown = || Error::UnknownQuantity(quantity.to_string());
    let column = match quantity {
        "total_energy" => None,
        "time" => return Err(unknown()),
        q => {
            let name = q
                .strip_prefix("seps_sup:")
                .map_or(q.to_string(), |e| format!("seps_grad_sup:{e}"));
            Some(table.column(&name).ok_or_else(unknown)?)
        }
    };
    let (t, ke, fe) = (
        table.column("time").ok_or_else(unknown)?,
        table.column("kinetic_energy").ok_or_else(unknown)?,
        table.column("field_energy").ok_or_else(unknown)?,
    );
    let mut out = header(quantity, DIAGNOSTICS_FILE, &format!("t {quantity}"));
    for r in &table.rows {
        let v = column.map_or(r[ke] + r[fe], |c| r[c]);
        writeln!(out, "{:e} {:e}", r[t], v).unwrap();
    }
    Ok(out)
}

fn spatial(run_dir: &Path, quantity: &str, column: &str) -> Result<String> {
    let table = Table::read(&run_dir.join(PROFILES_FILE))?;
    let missing = || Error::Format(format!("{PROFILES_FILE} lacks column {column}"));
    let (t, x, c) = (
        table.column("time").ok_or_else(missing)?,
        table.column("x").ok_or_else(missing)?,
        table.column(column).ok_or_else(missing)?,
    );
    let mut out = header(quantity, PROFILES_FILE, &format!("t x {column}"));
    for r in &table.rows {
        writeln!(out, "{:e} {:e} {:e}", r[t], r[x], r[c]).unwrap();
    }
    Ok(out)
}

fn marginal(run_dir: &Path) -> Result<String> {
    let dir = run_dir.join(SNAPSHOT_DIR);
    let mut files: BTreeMap<String, PathBuf> = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(&dir) {
        for e in entries {
            let p = e?.path();
            if p.extension().is_some_and(|x| x == "bin") {
                files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), p);
            }
        }
    }
    if files.is_empty() {
        return Err(Error::UnknownQuantity(
            "marginal_v2 needs snapshots; rerun with `snapshots = true`".into(),
        ));
    }
    let mut out = header("marginal_v2", SNAPSHOT_DIR, "t x v1 integral_f_dv2");
    for path in files.values() {
        let f = snapshot::load(path)?.f;
        let g = f.grid;
        let w = crate::grid::trapezoid_weights(g.nv2());
        let xs = g.x.nodes();
        let v1s = g.v1.nodes();
        for (i, x) in xs.iter().enumerate() {
            for (j, v1) in v1s.iter().enumerate() {
                let m: f64 = (0..g.nv2()).map(|k| w[k] * f.at(i, j, k)).sum::<f64>() * g.dv2();
                writeln!(out, "{:e} {:e} {:e} {:e}", f.time, x, v1, m).unwrap();
            }
        }
    }
    Ok(out)
}
