//! Model persistence: a versioned single-file format with a textual JSON
//! header followed by a checksummed binary payload of knot tables and
//! rotation matrices.
//!
//! Layout:
//!
//! ```text
//! RBIG1\n
//! {header json}\n
//! <payload: little-endian f64/u64 stream, SHA-256 recorded in the header>
//! ```
//!
//! Floating-point values are stored bit-exactly, so a loaded model
//! reproduces transform outputs bitwise.

use crate::error::{Error, Result};
use crate::flow::{FitConfig, FitTrace, RbigLayer, RbigModel, Standardizer};
use crate::marginal::MarginalGaussianizer;
use crate::rotations::{OrthonormalRotation, RotationProvenance};
use crate::tasks::OneClassModel;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"RBIG1\n";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: ModelKind,
    dim: usize,
    n_layers: usize,
    config: FitConfig,
    trace: FitTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    one_class: Option<OneClassHeader>,
    payload_len: u64,
    payload_sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    Density,
    OneClass,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct OneClassHeader {
    nu: f64,
    log_threshold: f64,
}

/// Save a fitted density model.
pub fn save_model(model: &RbigModel, path: &Path) -> Result<()> {
    save_impl(model, None, path)
}

/// Load a density model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<RbigModel> {
    let (model, one_class) = load_impl(path)?;
    if one_class.is_some() {
        return Err(Error::Corrupt(
            "file holds a one-class model; load it with the one-class reader".into(),
        ));
    }
    Ok(model)
}

/// Save a one-class model (the density model plus its threshold).
pub fn save_one_class(model: &OneClassModel, path: &Path) -> Result<()> {
    let oc = OneClassHeader {
        nu: model.nu(),
        log_threshold: model.log_threshold(),
    };
    save_impl(model.density_model(), Some(oc), path)
}

/// Load a one-class model saved by [`save_one_class`].
pub fn load_one_class(path: &Path) -> Result<OneClassModel> {
    let (model, one_class) = load_impl(path)?;
    let oc = one_class.ok_or_else(|| {
        Error::Corrupt("file holds a plain density model, not a one-class model".into())
    })?;
    Ok(OneClassModel::from_parts(model, oc.log_threshold, oc.nu))
}

fn save_impl(model: &RbigModel, one_class: Option<OneClassHeader>, path: &Path) -> Result<()> {
    let payload = encode_payload(model);
    let mut hasher = Sha256::new();
    hasher.update(&payload);
    let digest = hasher.finalize();

    let header = Header {
        format_version: FORMAT_VERSION,
        kind: if one_class.is_some() {
            ModelKind::OneClass
        } else {
            ModelKind::Density
        },
        dim: model.dim(),
        n_layers: model.layers().len(),
        config: model.config().clone(),
        trace: model.trace().clone(),
        one_class,
        payload_len: payload.len() as u64,
        payload_sha256: hex_string(&digest),
    };
    let header_json = serde_json::to_string(&header)
        .map_err(|e| Error::Corrupt(format!("header serialization failed: {e}")))?;

    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(header_json.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

fn load_impl(path: &Path) -> Result<(RbigModel, Option<OneClassHeader>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;

    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Corrupt("missing magic header".into()));
    }
    let rest = &bytes[MAGIC.len()..];
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Corrupt("truncated header".into()))?;
    let header_json = std::str::from_utf8(&rest[..newline])
        .map_err(|_| Error::Corrupt("header is not valid UTF-8".into()))?;

    // Probe the version before strict parsing so a newer writer yields a
    // version error rather than a parse failure.
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(header_json)
        .map_err(|e| Error::Corrupt(format!("unreadable header: {e}")))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: probe.format_version,
            supported: FORMAT_VERSION,
        });
    }

    let header: Header = serde_json::from_str(header_json)
        .map_err(|e| Error::Corrupt(format!("unreadable header: {e}")))?;

    let payload = &rest[newline + 1..];
    if payload.len() as u64 != header.payload_len {
        return Err(Error::Corrupt(format!(
            "payload length {} does not match header ({})",
            payload.len(),
            header.payload_len
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(payload);
    if hex_string(&hasher.finalize()) != header.payload_sha256 {
        return Err(Error::Corrupt("payload checksum mismatch".into()));
    }

    let model = decode_payload(payload, &header)?;
    Ok((model, header.one_class))
}

fn encode_payload(model: &RbigModel) -> Vec<u8> {
    let d = model.dim();
    let mut out = Vec::new();
    for &v in model.standardizer().mean() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in model.standardizer().scale() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for layer in model.layers() {
        out.extend_from_slice(&layer.delta_j_bits().to_le_bytes());
        for m in layer.marginals() {
            let cdf = m.cdf();
            out.extend_from_slice(&(cdf.knots_x().len() as u64).to_le_bytes());
            for &v in cdf.knots_x() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &v in cdf.knots_u() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&cdf.eps_u().to_le_bytes());
            out.extend_from_slice(&cdf.tail_sigma().to_le_bytes());
        }
        let rot = layer.rotation();
        out.push(match rot.provenance() {
            RotationProvenance::Pca => 0,
            RotationProvenance::Random => 1,
        });
        match rot.seed() {
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.to_le_bytes());
            }
            None => {
                out.push(0);
                out.extend_from_slice(&0u64.to_le_bytes());
            }
        }
        for i in 0..d {
            for j in 0..d {
                out.extend_from_slice(&rot.matrix()[(i, j)].to_le_bytes());
            }
        }
    }
    out
}

fn decode_payload(payload: &[u8], header: &Header) -> Result<RbigModel> {
    let mut cur = Cursor { buf: payload, pos: 0 };
    let d = header.dim;
    if d == 0 {
        return Err(Error::Corrupt("zero-dimensional model".into()));
    }

    let mean: Vec<f64> = (0..d).map(|_| cur.f64()).collect::<Result<_>>()?;
    let scale: Vec<f64> = (0..d).map(|_| cur.f64()).collect::<Result<_>>()?;
    let standardizer = Standardizer::from_parts(mean, scale)?;

    let mut layers = Vec::with_capacity(header.n_layers);
    for _ in 0..header.n_layers {
        let delta_j = cur.f64()?;
        let mut marginals = Vec::with_capacity(d);
        for _ in 0..d {
            let m = cur.u64()? as usize;
            if m < 2 || m > payload.len() {
                return Err(Error::Corrupt(format!("implausible knot count {m}")));
            }
            let knots_x: Vec<f64> = (0..m).map(|_| cur.f64()).collect::<Result<_>>()?;
            let knots_u: Vec<f64> = (0..m).map(|_| cur.f64()).collect::<Result<_>>()?;
            let eps_u = cur.f64()?;
            let tail_sigma = cur.f64()?;
            marginals.push(MarginalGaussianizer::from_parts(
                knots_x, knots_u, eps_u, tail_sigma,
            )?);
        }
        let provenance = match cur.u8()? {
            0 => RotationProvenance::Pca,
            1 => RotationProvenance::Random,
            other => return Err(Error::Corrupt(format!("unknown rotation provenance {other}"))),
        };
        let seed_flag = cur.u8()?;
        let seed_value = cur.u64()?;
        let seed = if seed_flag == 1 { Some(seed_value) } else { None };
        let mut matrix = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                matrix[(i, j)] = cur.f64()?;
            }
        }
        let rotation = OrthonormalRotation::from_parts(matrix, provenance, seed)?;
        layers.push(RbigLayer::from_parts(marginals, rotation, delta_j)?);
    }
    if cur.pos != payload.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after the last layer",
            payload.len() - cur.pos
        )));
    }

    RbigModel::from_parts(standardizer, layers, header.config.clone(), header.trace.clone())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt("payload ends mid-record".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
