//! ASCII PCD v0.7 reading and writing.
//!
//! Only `DATA ascii` is supported. Positions come from the `x y z` fields;
//! normals from `nx ny nz` (or PCL's `normal_x normal_y normal_z`) when all
//! three are present.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{estimate_normals, GeometryError, OrientedCloud, Point3, Vector3};

/// Contents of a PCD file before normals are guaranteed.
#[derive(Debug, Clone, PartialEq)]
pub struct PcdCloud {
    pub positions: Vec<Point3>,
    pub normals: Option<Vec<Vector3>>,
}

impl PcdCloud {
    /// Uses stored normals when present, otherwise estimates them from the
    /// `k` nearest neighbors oriented towards `viewpoint`.
    pub fn into_oriented(self, k: usize, viewpoint: &Point3) -> Result<OrientedCloud, GeometryError> {
        match self.normals {
            Some(normals) => OrientedCloud::new(self.positions, normals),
            None => estimate_normals(&self.positions, k, viewpoint),
        }
    }
}

pub fn load_pcd(path: impl AsRef<Path>) -> Result<PcdCloud, GeometryError> {
    parse_pcd(&fs::read_to_string(path)?)
}

pub fn save_pcd(cloud: &OrientedCloud, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    fs::write(path, format_pcd(cloud))?;
    Ok(())
}

pub fn format_pcd(cloud: &OrientedCloud) -> String {
    let n = cloud.len();
    let mut out = String::with_capacity(64 * (n + 12));
    out.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    out.push_str("VERSION 0.7\n");
    out.push_str("FIELDS x y z nx ny nz\n");
    out.push_str("SIZE 8 8 8 8 8 8\n");
    out.push_str("TYPE F F F F F F\n");
    out.push_str("COUNT 1 1 1 1 1 1\n");
    let _ = writeln!(out, "WIDTH {n}");
    out.push_str("HEIGHT 1\n");
    out.push_str("VIEWPOINT 0 0 0 1 0 0 0\n");
    let _ = writeln!(out, "POINTS {n}");
    out.push_str("DATA ascii\n");
    for (p, nrm) in cloud.positions().iter().zip(cloud.normals()) {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            p.x, p.y, p.z, nrm.x, nrm.y, nrm.z
        );
    }
    out
}

struct Header {
    /// Column offset of each named field within a data row.
    fields: Vec<(String, usize)>,
    columns: usize,
    points: Option<usize>,
}

impl Header {
    fn column(&self, names: &[&str]) -> Option<usize> {
        self.fields
            .iter()
            .find(|(name, _)| names.contains(&name.as_str()))
            .map(|&(_, c)| c)
    }
}

pub fn parse_pcd(text: &str) -> Result<PcdCloud, GeometryError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut names: Option<Vec<String>> = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut points = None;
    let mut width_height = (None, None);
    let mut data_seen = false;

    for (line_no, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = tokens.collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>().map_err(|_| GeometryError::Parse {
                line: line_no,
                message: format!("expected an integer, found `{s}`"),
            })
        };
        let single = |rest: &[&str]| -> Result<usize, GeometryError> {
            match rest {
                [v] => parse_usize(v),
                _ => Err(GeometryError::Parse {
                    line: line_no,
                    message: format!("{key} takes one value"),
                }),
            }
        };
        match key.as_str() {
            "VERSION" | "SIZE" | "TYPE" | "VIEWPOINT" => {}
            "FIELDS" => names = Some(rest.iter().map(|s| s.to_string()).collect()),
            "COUNT" => counts = Some(rest.iter().map(|s| parse_usize(s)).collect::<Result<_, _>>()?),
            "WIDTH" => width_height.0 = Some(single(&rest)?),
            "HEIGHT" => width_height.1 = Some(single(&rest)?),
            "POINTS" => points = Some(single(&rest)?),
            "DATA" => {
                if rest.first().map(|s| s.to_ascii_lowercase()) != Some("ascii".into()) {
                    return Err(GeometryError::Parse {
                        line: line_no,
                        message: "only DATA ascii is supported".into(),
                    });
                }
                data_seen = true;
                break;
            }
            other => {
                return Err(GeometryError::Parse {
                    line: line_no,
                    message: format!("unknown header entry `{other}`"),
                })
            }
        }
    }
    if !data_seen {
        return Err(GeometryError::Parse {
            line: text.lines().count(),
            message: "missing DATA line".into(),
        });
    }
    let names = names.ok_or_else(|| GeometryError::MissingField("FIELDS".into()))?;
    let counts = counts.unwrap_or_else(|| vec![1; names.len()]);
    if counts.len() != names.len() {
        return Err(GeometryError::Parse {
            line: 0,
            message: "COUNT and FIELDS lengths differ".into(),
        });
    }
    let mut fields = Vec::with_capacity(names.len());
    let mut offset = 0;
    for (name, count) in names.into_iter().zip(&counts) {
        fields.push((name, offset));
        offset += count;
    }
    let header = Header {
        fields,
        columns: offset,
        points: points.or(match width_height {
            (Some(w), Some(h)) => Some(w * h),
            _ => None,
        }),
    };

    let mut xyz = [0usize; 3];
    for (slot, name) in xyz.iter_mut().zip(["x", "y", "z"]) {
        *slot = header
            .column(&[name])
            .ok_or_else(|| GeometryError::MissingField(name.into()))?;
    }
    let normal_cols = match (
        header.column(&["nx", "normal_x"]),
        header.column(&["ny", "normal_y"]),
        header.column(&["nz", "normal_z"]),
    ) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut rows = 0;
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| GeometryError::Parse {
                    line: line_no,
                    message: format!("invalid number `{s}`"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != header.columns {
            return Err(GeometryError::Parse {
                line: line_no,
                message: format!("expected {} values, found {}", header.columns, values.len()),
            });
        }
        let p = Point3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]);
        // PCL marks invalid returns with NaN coordinates.
        if !p.coords.iter().all(|c| c.is_finite()) {
            continue;
        }
        if let Some(cols) = normal_cols {
            let n = Vector3::new(values[cols[0]], values[cols[1]], values[cols[2]]);
            let length = n.norm();
            if !(length.is_finite() && length > 0.0) {
                return Err(GeometryError::Parse {
                    line: line_no,
                    message: "normal is zero or non-finite".into(),
                });
            }
            // Leave already-unit normals untouched so save/load is lossless.
            normals.push(if (length - 1.0).abs() > 1e-12 { n / length } else { n });
        }
        positions.push(p);
    }
    if let Some(expected) = header.points {
        if rows != expected {
            return Err(GeometryError::Parse {
                line: text.lines().count(),
                message: format!("header declares {expected} points, found {rows}"),
            });
        }
    }
    Ok(PcdCloud {
        positions,
        normals: normal_cols.map(|_| normals),
    })
}
