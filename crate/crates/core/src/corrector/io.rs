//! Directory layout: `phi_i.pshf`, `q_i.pshf`, `psi_i.pshf`, `sigma_ijk.pshf`
//! (`j > k` only), `zeta.txt` and a `corrector.txt` manifest with the grid,
//! `â` and the cell-solve statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    build_zeta, conditional_flux, CellStats, ExtendedCorrector, HomogenizedMatrix, Zeta,
};
use crate::error::{Error, Result};
use crate::grid::{read_field_on, write_field, Grid, SpaceTimeField};
use crate::scalar::{cast, to_f64, Real};

pub fn save_corrector<T: Real>(c: &ExtendedCorrector<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let d = c.d();
    let g = c.grid();
    for i in 0..d {
        write_field(&c.phi[i], dir.join(format!("phi_{}.pshf", i + 1)))?;
        write_field(&c.q[i], dir.join(format!("q_{}.pshf", i + 1)))?;
        write_field(&c.psi[i], dir.join(format!("psi_{}.pshf", i + 1)))?;
        for j in 0..d {
            for k in 0..j {
                write_field(c.sigma_component(i, j, k), dir.join(format!("sigma_{}{}{}.pshf", i + 1, j + 1, k + 1)))?;
            }
        }
    }
    let mut z = String::new();
    for m in 0..c.zeta.len() {
        let row: Vec<String> = (0..d * d).map(|s| format!("{}", to_f64(c.zeta.values()[m * d * d + s]))).collect();
        writeln!(z, "{}", row.join(" ")).unwrap();
    }
    let end: Vec<String> = c.zeta.period_end().iter().map(|&v| format!("{}", to_f64(v))).collect();
    writeln!(z, "{}", end.join(" ")).unwrap();
    fs::write(dir.join("zeta.txt"), z)?;

    let mut m = String::new();
    writeln!(m, "d = {d}").unwrap();
    writeln!(m, "n = {}", g.n()).unwrap();
    writeln!(m, "n_t = {}", g.n_t()).unwrap();
    writeln!(m, "length = {}", to_f64(g.length())).unwrap();
    writeln!(m, "period = {}", to_f64(g.period())).unwrap();
    writeln!(m, "lambda = {}", to_f64(c.ahom.lambda())).unwrap();
    for r in 0..d {
        for col in 0..d {
            writeln!(m, "ahom_{}{} = {}", r + 1, col + 1, to_f64(c.ahom.get(r, col))).unwrap();
        }
    }
    for (i, s) in c.stats.iter().enumerate() {
        writeln!(m, "periods_{} = {}", i + 1, s.periods).unwrap();
        writeln!(m, "period_change_{} = {:e}", i + 1, s.period_change).unwrap();
        writeln!(m, "cg_iterations_{} = {}", i + 1, s.cg_iterations).unwrap();
    }
    fs::write(dir.join("corrector.txt"), m)?;
    Ok(())
}

fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn load_corrector<T: Real>(dir: impl AsRef<Path>) -> Result<ExtendedCorrector<T>> {
    let dir = dir.as_ref();
    let manifest = fs::read_to_string(dir.join("corrector.txt"))
        .map_err(|_| Error::MissingManifest(dir.to_path_buf()))?;
    let kv = parse_manifest(&manifest);
    let get = |key: &str| -> Result<&str> {
        kv.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("manifest lacks {key}")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?.parse::<f64>().map_err(|e| Error::Format(format!("{key}: {e}")))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?.parse::<usize>().map_err(|e| Error::Format(format!("{key}: {e}")))
    };
    let d = int("d")?;
    let grid = Grid::with_periods(d, int("n")?, int("n_t")?, cast(num("length")?), cast(num("period")?))?;
    let read = |name: String| -> Result<SpaceTimeField<T>> { read_field_on(dir.join(name), &grid) };
    let mut phi = Vec::new();
    let mut q = Vec::new();
    let mut psi = Vec::new();
    let mut sigma = vec![SpaceTimeField::zeros(grid, crate::grid::Rank::Scalar); d * d * d];
    for i in 0..d {
        phi.push(read(format!("phi_{}.pshf", i + 1))?);
        q.push(read(format!("q_{}.pshf", i + 1))?);
        psi.push(read(format!("psi_{}.pshf", i + 1))?);
        for j in 0..d {
            for k in 0..j {
                let f = read(format!("sigma_{}{}{}.pshf", i + 1, j + 1, k + 1))?;
                sigma[(i * d + k) * d + j] = f.map(|v| -v);
                sigma[(i * d + j) * d + k] = f;
            }
        }
    }
    let mut entries = Vec::with_capacity(d * d);
    for r in 0..d {
        for col in 0..d {
            entries.push(cast::<T>(num(&format!("ahom_{}{}", r + 1, col + 1))?));
        }
    }
    let ahom = HomogenizedMatrix::new(d, entries, cast(num("lambda")?))?;
    let conditional = conditional_flux(&q)?;
    let zeta_text = fs::read_to_string(dir.join("zeta.txt"))?;
    let rows: Vec<Vec<T>> = zeta_text
        .lines()
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse::<f64>().map(cast).map_err(|e| Error::Format(format!("zeta: {e}"))))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let zeta = match rows.split_last() {
        Some((end, body)) if body.len() == grid.n_t() => {
            Zeta::from_parts(d, body.concat(), end.clone())?
        }
        _ => build_zeta(&conditional, &ahom, grid.tau()),
    };
    let mut stats = Vec::new();
    for i in 0..d {
        stats.push(CellStats {
            periods: int(&format!("periods_{}", i + 1)).unwrap_or(0),
            period_change: num(&format!("period_change_{}", i + 1)).unwrap_or(0.0),
            cg_iterations: int(&format!("cg_iterations_{}", i + 1)).unwrap_or(0),
        });
    }
    Ok(ExtendedCorrector { phi, q, psi, sigma, zeta, conditional, ahom, stats })
}
