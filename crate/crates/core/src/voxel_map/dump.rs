//! Plain-text voxel dump.
//!
//! ```text
//! dims <nx> <ny> <nz> voxel_size <sx> <sy> <sz> datum <ax> <ay> <az>
//! <i> <j> <k> <occupancy>
//! ...
//! ```
//!
//! Blank lines and lines starting with `#` are ignored on read. Voxels that
//! are not listed read back as unseen (occupancy 0.5).

use std::io::{BufRead, Write};

use thiserror::Error;

use super::{GridGeometry, OccupancyModel, VoxelGrid, VoxelIndex, VoxelMapError};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Map(#[from] VoxelMapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Write the header followed by one `i j k occupancy` line per entry.
pub fn write_voxel_dump<W, I>(out: &mut W, geometry: &GridGeometry, entries: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (VoxelIndex, f64)>,
{
    let [nx, ny, nz] = geometry.dims();
    let s = geometry.voxel_size();
    let d = geometry.datum();
    writeln!(
        out,
        "dims {nx} {ny} {nz} voxel_size {s} {s} {s} datum {} {} {}",
        d.x, d.y, d.z
    )?;
    for (c, occ) in entries {
        writeln!(out, "{} {} {} {}", c.i, c.j, c.k, occ)?;
    }
    Ok(())
}

impl VoxelGrid {
    /// Dump every voxel that is not classified unseen.
    pub fn export<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let g = self.geometry();
        let entries = (0..g.len())
            .filter(|&i| self.class_at(i) != super::VoxelClass::Unseen)
            .map(|i| (g.index_of(i), self.occupancy_at(i)));
        write_voxel_dump(out, g, entries)
    }
}

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64, DumpError> {
    tok.and_then(|t| t.parse::<f64>().ok())
        .ok_or_else(|| DumpError::Parse {
            line,
            msg: format!("expected number for {what}"),
        })
}

fn expect_word(tok: Option<&str>, word: &str, line: usize) -> Result<(), DumpError> {
    if tok == Some(word) {
        Ok(())
    } else {
        Err(DumpError::Parse {
            line,
            msg: format!("expected `{word}`"),
        })
    }
}

/// Read a dump back into a grid using `model` for classification.
pub fn read_voxel_dump<R: BufRead>(input: R, model: OccupancyModel) -> Result<VoxelGrid, DumpError> {
    let mut grid: Option<VoxelGrid> = None;
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        match grid.as_mut() {
            None => {
                expect_word(toks.next(), "dims", line_no)?;
                let mut dims = [0usize; 3];
                for d in dims.iter_mut() {
                    *d = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| DumpError::Parse {
                            line: line_no,
                            msg: "expected integer dimension".into(),
                        })?;
                }
                expect_word(toks.next(), "voxel_size", line_no)?;
                let sx = parse_f64(toks.next(), line_no, "voxel_size")?;
                let sy = parse_f64(toks.next(), line_no, "voxel_size")?;
                let sz = parse_f64(toks.next(), line_no, "voxel_size")?;
                if sx != sy || sy != sz {
                    return Err(DumpError::Parse {
                        line: line_no,
                        msg: "anisotropic voxel sizes are not supported".into(),
                    });
                }
                expect_word(toks.next(), "datum", line_no)?;
                let ax = parse_f64(toks.next(), line_no, "datum")?;
                let ay = parse_f64(toks.next(), line_no, "datum")?;
                let az = parse_f64(toks.next(), line_no, "datum")?;
                let geometry = GridGeometry::new(dims, sx, Vec3::new(ax, ay, az))?;
                grid = Some(VoxelGrid::new(geometry, model.clone())?);
            }
            Some(grid) => {
                let mut idx = [0i32; 3];
                for v in idx.iter_mut() {
                    *v = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| DumpError::Parse {
                            line: line_no,
                            msg: "expected integer voxel index".into(),
                        })?;
                }
                let occ = parse_f64(toks.next(), line_no, "occupancy")?;
                if !(0.0..=1.0).contains(&occ) {
                    return Err(DumpError::Parse {
                        line: line_no,
                        msg: format!("occupancy {occ} outside [0, 1]"),
                    });
                }
                grid.set_occupancy(VoxelIndex::new(idx[0], idx[1], idx[2]), occ)?;
            }
        }
        if toks.next().is_some() {
            return Err(DumpError::Parse {
                line: line_no,
                msg: "unexpected trailing tokens".into(),
            });
        }
    }
    grid.ok_or(DumpError::Parse {
        line: 0,
        msg: "missing header".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_map::VoxelClass;
    use proptest::prelude::*;

    #[test]
    fn header_format() {
        let g = GridGeometry::new([3, 4, 5], 0.2, Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let grid = VoxelGrid::new(g, OccupancyModel::default()).unwrap();
        let mut buf = Vec::new();
        grid.export(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dims 3 4 5 voxel_size 0.2 0.2 0.2 datum 1 -2 0.5\n"
        );
    }

    #[test]
    fn rejects_bad_lines() {
        let text = "dims 2 2 2 voxel_size 0.2 0.2 0.2 datum 0 0 0\n0 0 x 0.9\n";
        match read_voxel_dump(text.as_bytes(), OccupancyModel::default()) {
            Err(DumpError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "dims 2 2 2 voxel_size 0.2 0.2 0.2 datum 0 0 0\n5 0 0 0.9\n";
        assert!(matches!(
            read_voxel_dump(text.as_bytes(), OccupancyModel::default()),
            Err(DumpError::Map(_))
        ));
        assert!(read_voxel_dump("".as_bytes(), OccupancyModel::default()).is_err());
    }

    proptest! {
        #[test]
        fn export_read_preserves_classes(cells in proptest::collection::vec((0i32..5, 0i32..4, 0i32..3, 0.0f64..=1.0), 0..30)) {
            let g = GridGeometry::new([5, 4, 3], 0.25, Vec3::new(0.5, 0.0, -1.0)).unwrap();
            let mut grid = VoxelGrid::new(g, OccupancyModel::default()).unwrap();
            for (i, j, k, p) in cells {
                grid.set_occupancy(VoxelIndex::new(i, j, k), p).unwrap();
            }
            let mut buf = Vec::new();
            grid.export(&mut buf).unwrap();
            let back = read_voxel_dump(buf.as_slice(), OccupancyModel::default()).unwrap();
            prop_assert_eq!(back.geometry(), grid.geometry());
            for idx in 0..grid.geometry().len() {
                let (a, b) = (grid.class_at(idx), back.class_at(idx));
                prop_assert_eq!(a, b);
                if a != VoxelClass::Unseen {
                    prop_assert!((grid.occupancy_at(idx) - back.occupancy_at(idx)).abs() < 1e-12);
                }
            }
        }
    }
}
