use std::io::Write;
use std::path::{Path, PathBuf};

use noisy_sort::estimators::{uncertainty_region, MsState, UncertaintyRegion};

use crate::error::Result;

const PBM_LINE: usize = 70;

/// Plain PBM (`P1`): 1 marks an uncertain pair, row `i` is item `i`.
pub fn write_pbm<W: Write>(region: &UncertaintyRegion, mut w: W) -> Result<()> {
    let n = region.n();
    writeln!(w, "P1")?;
    writeln!(w, "{n} {n}")?;
    let mut line = Vec::with_capacity(PBM_LINE + 1);
    for i in 0..n {
        for bit in region.row(i) {
            line.push(if bit { b'1' } else { b'0' });
            if line.len() == PBM_LINE {
                line.push(b'\n');
                w.write_all(&line)?;
                line.clear();
            }
        }
        if !line.is_empty() {
            line.push(b'\n');
            w.write_all(&line)?;
            line.clear();
        }
    }
    Ok(())
}

/// Writes `region_stage{t}.pbm` for every state into `dir`.
pub fn emit_regions(states: &[MsState], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    states
        .iter()
        .map(|st| {
            let path = dir.join(format!("region_stage{}.pbm", st.stage()));
            let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_pbm(&uncertainty_region(st), file)?;
            Ok(path)
        })
        .collect()
}

/// Dimensions and number of ones in a `P1` file.
pub fn read_pbm_stats(path: &Path) -> Result<(usize, usize, u64)> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text.lines().filter(|l| !l.starts_with('#'));
    let bad = || crate::error::HarnessError::config(format!("{}: not a P1 bitmap", path.display()));
    if tokens.next().map(str::trim) != Some("P1") {
        return Err(bad());
    }
    let dims = tokens.next().ok_or_else(bad)?;
    let mut it = dims.split_whitespace().map(|x| x.parse::<usize>());
    let (w, h) = match (it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h))) => (w, h),
        _ => return Err(bad()),
    };
    let mut ones = 0u64;
    let mut pixels = 0usize;
    for l in tokens {
        for c in l.bytes() {
            match c {
                b'1' => {
                    ones += 1;
                    pixels += 1;
                }
                b'0' => pixels += 1,
                _ => {}
            }
        }
    }
    if pixels != w * h {
        return Err(bad());
    }
    Ok((w, h, ones))
}
