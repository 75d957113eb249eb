//! Grid serialization: CSV `(τ, t, re/im per component)` and a binary dump. Both round-trip
//! bit-exactly.

use std::io::Write;
use std::path::Path;

use glue_core::cylinder::{CylinderGrid, Layout, Sampling, TauAxis};
use glue_core::C64;

use crate::error::{LabError, Result};
use crate::report::{num, Provenance};

const MAGIC: &[u8; 8] = b"GLUEGRID";
pub const DUMP_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 3 * 8 + 3 * 8;

pub fn dump_bytes(u: &CylinderGrid) -> Vec<u8> {
    let l = &u.layout;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * u.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    let sampling: u32 = match l.sampling {
        Sampling::Nodes => 0,
        Sampling::Cells => 1,
    };
    out.extend_from_slice(&sampling.to_le_bytes());
    for v in [l.axis.len as u64, l.n_t as u64, l.dim as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [l.axis.start, l.axis.step, l.period] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in &u.values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn load_bytes(b: &[u8]) -> Result<CylinderGrid> {
    let bad = |m: &str| LabError::Dump(m.to_string());
    if b.len() < HEADER_LEN || &b[..8] != MAGIC {
        return Err(bad("not a grid dump"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != DUMP_VERSION {
        return Err(LabError::Dump(format!("unsupported dump version {version}")));
    }
    let sampling = match u32_at(12) {
        0 => Sampling::Nodes,
        1 => Sampling::Cells,
        s => return Err(LabError::Dump(format!("bad sampling tag {s}"))),
    };
    let (len, n_t, dim) = (u64_at(16) as usize, u64_at(24) as usize, u64_at(32) as usize);
    let (start, step, period) = (f64_at(40), f64_at(48), f64_at(56));
    let layout = Layout { axis: TauAxis::new(start, step, len), sampling, n_t, dim, period };
    let count = layout.size();
    if b.len() != HEADER_LEN + 16 * count {
        return Err(LabError::Dump(format!("payload length {} does not match layout ({count} values)", b.len() - HEADER_LEN)));
    }
    let values = (0..count).map(|k| C64::new(f64_at(HEADER_LEN + 16 * k), f64_at(HEADER_LEN + 16 * k + 8))).collect();
    Ok(CylinderGrid { layout, values })
}

pub fn write_dump(path: &Path, u: &CylinderGrid) -> Result<()> {
    std::fs::write(path, dump_bytes(u)).map_err(|e| LabError::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<CylinderGrid> {
    load_bytes(&std::fs::read(path).map_err(|e| LabError::io(path, e))?)
}

/// Long-format CSV, one row per sample; the layout sits in a `# layout:` header line.
pub fn write_grid_csv(path: &Path, prov: &Provenance, u: &CylinderGrid) -> Result<()> {
    let l = &u.layout;
    let mut buf = Vec::new();
    for line in prov.header_lines() {
        writeln!(buf, "{line}").expect("write to Vec");
    }
    let sampling = match l.sampling {
        Sampling::Nodes => "nodes",
        Sampling::Cells => "cells",
    };
    writeln!(
        buf,
        "# layout: start={} step={} len={} sampling={sampling} n_t={} dim={} period={}",
        num(l.axis.start),
        num(l.axis.step),
        l.axis.len,
        l.n_t,
        l.dim,
        num(l.period)
    )
    .expect("write to Vec");
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
        let mut head = vec!["tau [1]".to_string(), "t [1]".to_string()];
        for c in 0..l.dim {
            head.push(format!("re{c} [chart]"));
            head.push(format!("im{c} [chart]"));
        }
        w.write_record(&head)?;
        for j in 0..l.n_tau() {
            for i in 0..l.n_t {
                let mut row = vec![num(l.tau(j)), num(l.t(i))];
                for z in u.at(j, i) {
                    row.push(num(z.re));
                    row.push(num(z.im));
                }
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| LabError::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| LabError::io(path, e))
}

pub fn read_grid_csv(path: &Path) -> Result<CylinderGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let meta = text
        .lines()
        .find_map(|l| l.strip_prefix("# layout: "))
        .ok_or_else(|| LabError::Dump("missing layout header".into()))?;
    let field = |k: &str| -> Result<&str> {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(k).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| LabError::Dump(format!("layout header lacks {k}")))
    };
    let pf = |k: &str| -> Result<f64> { field(k)?.parse().map_err(|_| LabError::Dump(format!("bad {k}"))) };
    let pu = |k: &str| -> Result<usize> { field(k)?.parse().map_err(|_| LabError::Dump(format!("bad {k}"))) };
    let sampling = match field("sampling")? {
        "nodes" => Sampling::Nodes,
        "cells" => Sampling::Cells,
        s => return Err(LabError::Dump(format!("bad sampling {s}"))),
    };
    let layout = Layout { axis: TauAxis::new(pf("start")?, pf("step")?, pu("len")?), sampling, n_t: pu("n_t")?, dim: pu("dim")?, period: pf("period")? };
    let mut values = Vec::with_capacity(layout.size());
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 + 2 * layout.dim {
            return Err(LabError::Dump(format!("row with {} fields", rec.len())));
        }
        for c in 0..layout.dim {
            let p = |s: &str| s.parse::<f64>().map_err(|_| LabError::Dump(format!("bad number {s:?}")));
            values.push(C64::new(p(&rec[2 + 2 * c])?, p(&rec[3 + 2 * c])?));
        }
    }
    if values.len() != layout.size() {
        return Err(LabError::Dump(format!("{} values for a layout of {}", values.len(), layout.size())));
    }
    Ok(CylinderGrid { layout, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CylinderGrid {
        let layout = Layout::nodes(TauAxis::new(-1.0 / 3.0, 0.1, 7), 8, 2);
        CylinderGrid::from_fn(layout, |tau, t| {
            vec![C64::new((tau * 7.1).sin() * 1e-300, t.exp()), C64::new(f64::MIN_POSITIVE, -tau / 3.0)]
        })
    }

    fn bits(u: &CylinderGrid) -> Vec<(u64, u64)> {
        u.values.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let u = sample();
        let v = load_bytes(&dump_bytes(&u)).unwrap();
        assert_eq!(v.layout, u.layout);
        assert_eq!(bits(&v), bits(&u));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let u = sample();
        write_grid_csv(&p, &Provenance::new("test", "flat_toy", 0), &u).unwrap();
        let v = read_grid_csv(&p).unwrap();
        assert_eq!(v.layout, u.layout);
        assert_eq!(bits(&v), bits(&u));
    }

    #[test]
    fn corrupt_dumps_are_rejected() {
        let mut b = dump_bytes(&sample());
        assert!(load_bytes(&b[..b.len() - 1]).is_err());
        b[8] = 9;
        assert!(matches!(load_bytes(&b), Err(LabError::Dump(m)) if m.contains("version")));
        assert!(load_bytes(b"nonsense").is_err());
    }
}
