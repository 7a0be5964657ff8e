//! OGF-1 grid container.
//!
//! Layout:
//!
//! ```text
//! "OGF1"                      4 magic bytes
//! header_len: u32 LE          length of the UTF-8 header in bytes
//! header                      `key:value` lines
//! axes                        each axis listed in `axes`, consecutive f64 LE edges
//! variables                   each variable listed in `variables`, f32 LE,
//!                             row-major over the axes order
//! ```
//!
//! Current fields use `axes:time,depth,lat,lon` and `variables:u,v`;
//! bathymetry uses `axes:lat,lon` and `variables:floor_depth`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Axis, Bathymetry, CurrentField, EnvError};

const MAGIC: &[u8; 4] = b"OGF1";
const FORMAT: &str = "OGF-1";

fn malformed(location: impl Into<String>, message: impl Into<String>) -> EnvError {
    EnvError::MalformedFile { location: location.into(), message: message.into() }
}

struct AxisDecl {
    name: &'static str,
    units: &'static str,
}

const FIELD_AXES: [AxisDecl; 4] = [
    AxisDecl { name: "time", units: "s" },
    AxisDecl { name: "depth", units: "m" },
    AxisDecl { name: "lat", units: "degrees" },
    AxisDecl { name: "lon", units: "degrees" },
];
const FIELD_VARS: [(&str, &str); 2] = [("u", "m s-1"), ("v", "m s-1")];

const BATHY_AXES: [AxisDecl; 2] =
    [AxisDecl { name: "lat", units: "degrees" }, AxisDecl { name: "lon", units: "degrees" }];
const BATHY_VARS: [(&str, &str); 1] = [("floor_depth", "m")];

fn encode(kind: &str, axes: &[(&AxisDecl, &Axis)], vars: &[((&str, &str), &[f32])]) -> Vec<u8> {
    let mut header = String::new();
    header.push_str(&format!("format:{FORMAT}\nkind:{kind}\n"));
    let names: Vec<&str> = axes.iter().map(|(d, _)| d.name).collect();
    header.push_str(&format!("axes:{}\n", names.join(",")));
    for (decl, axis) in axes {
        header.push_str(&format!("axis.{}.length:{}\n", decl.name, axis.edges().len()));
        header.push_str(&format!("axis.{}.units:{}\n", decl.name, decl.units));
    }
    let var_names: Vec<&str> = vars.iter().map(|((n, _), _)| *n).collect();
    header.push_str(&format!("variables:{}\n", var_names.join(",")));
    for ((name, units), _) in vars {
        header.push_str(&format!("variable.{name}.units:{units}\n"));
    }

    let payload: usize = axes.iter().map(|(_, a)| a.edges().len() * 8).sum::<usize>()
        + vars.iter().map(|(_, d)| d.len() * 4).sum::<usize>();
    let mut out = Vec::with_capacity(8 + header.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (_, axis) in axes {
        for e in axis.edges() {
            out.extend_from_slice(&e.to_le_bytes());
        }
    }
    for (_, data) in vars {
        for x in *data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EnvError> {
        if self.bytes.len() - self.pos < n {
            return Err(malformed(
                format!("byte {}", self.pos),
                format!("truncated payload reading {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

struct Decoded {
    axes: BTreeMap<String, Axis>,
    vars: BTreeMap<String, Vec<f32>>,
}

fn decode(bytes: &[u8], kind: &str, axes: &[AxisDecl], vars: &[(&str, &str)]) -> Result<Decoded, EnvError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(malformed("byte 0", "missing OGF1 magic"));
    }
    let len = u32::from_le_bytes(cur.take(4, "header length")?.try_into().unwrap()) as usize;
    let header_start = cur.pos;
    let header = std::str::from_utf8(cur.take(len, "header")?)
        .map_err(|e| malformed(format!("byte {}", header_start + e.valid_up_to()), "header is not UTF-8"))?;

    let mut kv = BTreeMap::new();
    for (n, line) in header.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| malformed(format!("header line {}", n + 1), format!("expected key:value, got {line:?}")))?;
        if kv.insert(k.to_string(), v.to_string()).is_some() {
            return Err(malformed(format!("header line {}", n + 1), format!("duplicate key {k:?}")));
        }
    }
    let get = |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| malformed("header", format!("missing key {k:?}")));
    let expect = |k: &str, want: &str| -> Result<(), EnvError> {
        let got = get(k)?;
        if got != want {
            return Err(malformed(format!("header key {k:?}"), format!("expected {want:?}, got {got:?}")));
        }
        Ok(())
    };
    expect("format", FORMAT)?;
    expect("kind", kind)?;
    let axis_names: Vec<&str> = axes.iter().map(|a| a.name).collect();
    expect("axes", &axis_names.join(","))?;
    let var_names: Vec<&str> = vars.iter().map(|v| v.0).collect();
    expect("variables", &var_names.join(","))?;

    let mut lengths = Vec::new();
    for a in axes {
        expect(&format!("axis.{}.units", a.name), a.units)?;
        let key = format!("axis.{}.length", a.name);
        let n: usize =
            get(&key)?.parse().map_err(|_| malformed(format!("header key {key:?}"), "length is not an integer"))?;
        if n < 2 {
            return Err(malformed(format!("header key {key:?}"), "axis needs at least two edges"));
        }
        lengths.push(n);
    }
    for (name, units) in vars {
        expect(&format!("variable.{name}.units"), units)?;
    }

    let mut out = Decoded { axes: BTreeMap::new(), vars: BTreeMap::new() };
    for (a, &n) in axes.iter().zip(&lengths) {
        let at = cur.pos;
        let raw = cur.take(n * 8, &format!("axis {}", a.name))?;
        let edges: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let axis = Axis::new(edges).map_err(|e| malformed(format!("axis {} at byte {at}", a.name), e.to_string()))?;
        out.axes.insert(a.name.to_string(), axis);
    }
    let cells: usize = lengths.iter().map(|n| n - 1).product();
    for (name, _) in vars {
        let raw = cur.take(cells * 4, &format!("variable {name}"))?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.vars.insert(name.to_string(), data);
    }
    if cur.pos != bytes.len() {
        return Err(malformed(format!("byte {}", cur.pos), format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(out)
}

pub fn write_field(field: &CurrentField) -> Vec<u8> {
    let axes = [
        (&FIELD_AXES[0], field.time_axis()),
        (&FIELD_AXES[1], field.depth_axis()),
        (&FIELD_AXES[2], field.lat_axis()),
        (&FIELD_AXES[3], field.lon_axis()),
    ];
    encode("current", &axes, &[(FIELD_VARS[0], field.u()), (FIELD_VARS[1], field.v())])
}

pub fn read_field(bytes: &[u8]) -> Result<CurrentField, EnvError> {
    let mut d = decode(bytes, "current", &FIELD_AXES, &FIELD_VARS)?;
    let mut axis = |n: &str| d.axes.remove(n).unwrap();
    let (lon, lat, depth, time) = (axis("lon"), axis("lat"), axis("depth"), axis("time"));
    let u = d.vars.remove("u").unwrap();
    let v = d.vars.remove("v").unwrap();
    CurrentField::new(lon, lat, depth, time, u, v).map_err(|e| malformed("payload", e.to_string()))
}

pub fn write_bathy(bathy: &Bathymetry) -> Vec<u8> {
    let axes = [(&BATHY_AXES[0], bathy.lat_axis()), (&BATHY_AXES[1], bathy.lon_axis())];
    encode("bathymetry", &axes, &[(BATHY_VARS[0], bathy.floor_depth())])
}

pub fn read_bathy(bytes: &[u8]) -> Result<Bathymetry, EnvError> {
    let mut d = decode(bytes, "bathymetry", &BATHY_AXES, &BATHY_VARS)?;
    let lon = d.axes.remove("lon").unwrap();
    let lat = d.axes.remove("lat").unwrap();
    let floor = d.vars.remove("floor_depth").unwrap();
    Bathymetry::new(lon, lat, floor).map_err(|e| malformed("payload", e.to_string()))
}

pub fn save_field(field: &CurrentField, path: impl AsRef<Path>) -> Result<(), EnvError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&write_field(field))?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<CurrentField, EnvError> {
    read_field(&fs::read(path)?)
}

pub fn save_bathy(bathy: &Bathymetry, path: impl AsRef<Path>) -> Result<(), EnvError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&write_bathy(bathy))?;
    Ok(())
}

pub fn load_bathy(path: impl AsRef<Path>) -> Result<Bathymetry, EnvError> {
    read_bathy(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_field(u: Vec<f32>, v: Vec<f32>) -> CurrentField {
        CurrentField::new(
            Axis::new(vec![-1.0, -0.5, 0.0]).unwrap(),
            Axis::new(vec![55.0, 55.5]).unwrap(),
            Axis::new(vec![0.0, 10.0, 50.0]).unwrap(),
            Axis::new(vec![0.0, 3600.0, 7200.0]).unwrap(),
            u,
            v,
        )
        .unwrap()
    }

    #[test]
    fn header_is_self_describing() {
        let bytes = write_field(&small_field(vec![0.0; 8], vec![0.0; 8]));
        assert_eq!(&bytes[..4], b"OGF1");
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[8..8 + len]).unwrap();
        assert!(header.contains("axes:time,depth,lat,lon\n"));
        assert!(header.contains("axis.lon.length:3\n"));
        assert!(header.contains("variable.u.units:m s-1\n"));
        assert_eq!(bytes.len(), 8 + len + (3 + 2 + 3 + 3) * 8 + 2 * 8 * 4);
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = write_field(&small_field(vec![0.5; 8], vec![0.0; 8]));
        let err = read_field(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, EnvError::MalformedFile { .. }), "{err}");
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn unsorted_axis_rejected() {
        let mut bytes = write_field(&small_field(vec![0.5; 8], vec![0.0; 8]));
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        // second time edge -> smaller than the first
        let off = 8 + len + 8;
        bytes[off..off + 8].copy_from_slice(&(-5.0f64).to_le_bytes());
        let err = read_field(&bytes).unwrap_err();
        assert!(err.to_string().contains("axis time"), "{err}");
    }

    #[test]
    fn wrong_kind_and_magic_rejected() {
        let b = Bathymetry::new(
            Axis::regular(0.0, 1.0, 2).unwrap(),
            Axis::regular(50.0, 51.0, 1).unwrap(),
            vec![80.0, 90.0],
        )
        .unwrap();
        let bytes = write_bathy(&b);
        assert!(read_field(&bytes).is_err());
        assert_eq!(read_bathy(&bytes).unwrap(), b);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_bathy(&bad).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ogf");
        let f = small_field((0..8).map(|i| i as f32 * 0.1).collect(), vec![-0.25; 8]);
        save_field(&f, &path).unwrap();
        assert_eq!(load_field(&path).unwrap(), f);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(-3.0f32..3.0, 16)) {
            let f = small_field(values[..8].to_vec(), values[8..].to_vec());
            let bytes = write_field(&f);
            let back = read_field(&bytes).unwrap();
            prop_assert_eq!(write_field(&back), bytes);
            prop_assert_eq!(back, f);
        }
    }
}
