//! `.tmmodel` files and `.tmc` manifests.
//!
//! Model layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "TMMODEL\0"
//! version    u32      1
//! flags      u32      bit 0: automaton states present
//! header_len u32
//! header     header_len bytes of UTF-8 key=value lines
//! weights    u32 per clause
//! includes   ceil(literals/64) u64 words per clause
//! states     state_bits * ceil(literals/64) u64 words per clause (flag bit 0)
//! checksum   u32 CRC-32 of every preceding byte
//! ```
//!
//! Clauses are ordered class by class, positive half first.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::booleanize::BooleanizerSpec;
use crate::composite::{Composite, CompositeManifest};
use crate::error::{usage, Error, Result};
use crate::kv::KvMap;
use crate::tm::{Hyperparams, TmModel};

pub const MAGIC: &[u8; 8] = b"TMMODEL\0";
pub const VERSION: u32 = 1;
const FLAG_STATES: u32 = 1;

/// What goes into a model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    /// Include masks and weights; enough for inference and composites.
    Inference,
    /// Also the raw automaton states, so training can resume.
    Full,
}

fn header(model: &TmModel) -> String {
    let mut kv = KvMap::new();
    let (h, w, c) = model.image_shape();
    kv.insert("model.classes", model.classes());
    kv.insert("model.literals", model.geometry().literals());
    kv.insert("image.height", h);
    kv.insert("image.width", w);
    kv.insert("image.channels", c);
    model.hyperparams().write_kv(&mut kv);
    model.booleanizer().write_kv(&mut kv);
    kv.render()
}

pub fn encode_model(model: &TmModel, tier: Tier) -> Result<Vec<u8>> {
    if tier == Tier::Full && !model.is_resumable() {
        return usage("model has no automaton states; save it with the inference tier");
    }
    let bank = model.bank();
    let head = header(model);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if tier == Tier::Full { FLAG_STATES } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(head.as_bytes());
    for c in 0..bank.clause_count() {
        out.extend_from_slice(&bank.weight(c).to_le_bytes());
    }
    for c in 0..bank.clause_count() {
        for w in bank.include_mask(c) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    if tier == Tier::Full {
        for c in 0..bank.clause_count() {
            for w in bank.clause_planes(c) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::Integrity("model file is truncated".into()))?;
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<TmModel> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(Error::Integrity("model file is truncated".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("not a .tmmodel file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Integrity("checksum mismatch".into()));
    }

    let mut r = Reader { bytes: body, at: 12 };
    let flags = r.u32()?;
    let head_len = r.u32()? as usize;
    let head = std::str::from_utf8(r.take(head_len)?)
        .map_err(|_| Error::Format("model header is not UTF-8".into()))?;
    let kv = KvMap::parse(head)?;
    let hyper = Hyperparams::read_kv(&kv)?;
    let booleanizer = BooleanizerSpec::read_kv(&kv)?;
    let shape = (kv.get("image.height")?, kv.get("image.width")?, kv.get("image.channels")?);
    let classes: usize = kv.get("model.classes")?;
    let mut model = TmModel::new(hyper, booleanizer, shape, classes)
        .map_err(|e| Error::Format(format!("model header: {e}")))?;
    let literals: usize = kv.get("model.literals")?;
    if literals != model.geometry().literals() {
        return Err(Error::Format(format!(
            "header declares {literals} literals, geometry implies {}",
            model.geometry().literals()
        )));
    }

    let bank = model.bank_mut();
    let clauses = bank.clause_count();
    let words = bank.words();
    for c in 0..clauses {
        let w = r.u32()?;
        if w == 0 {
            return Err(Error::Format(format!("clause {c} has weight 0")));
        }
        bank.set_weight(c, w);
    }
    let mut mask = vec![0u64; words];
    for c in 0..clauses {
        for m in mask.iter_mut() {
            *m = r.u64()?;
        }
        bank.set_include_mask(c, &mask);
    }
    let resumable = flags & FLAG_STATES != 0;
    if resumable {
        let mut planes = vec![0u64; bank.state_bits() * words];
        for c in 0..clauses {
            for p in planes.iter_mut() {
                *p = r.u64()?;
            }
            bank.set_clause_planes(c, &planes);
        }
    }
    if r.at != body.len() {
        return Err(Error::Integrity(format!(
            "{} unexpected trailing bytes",
            body.len() - r.at
        )));
    }
    model.resumable = resumable;
    Ok(model)
}

pub fn save_model(model: &TmModel, path: &Path, tier: Tier) -> Result<()> {
    fs::write(path, encode_model(model, tier)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TmModel> {
    decode_model(&fs::read(path)?)
}

/// Reads a `.tmc` manifest; relative member paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<CompositeManifest> {
    let text = fs::read_to_string(path)?;
    let mut manifest = CompositeManifest::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for m in &mut manifest.members {
        if m.is_relative() {
            *m = base.join(&*m);
        }
    }
    Ok(manifest)
}

pub fn save_manifest(manifest: &CompositeManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    fs::write(path, manifest.render())?;
    Ok(())
}

/// Loads every member listed in a manifest.
pub fn load_composite(manifest: &CompositeManifest) -> Result<Composite> {
    manifest.validate()?;
    let members = manifest
        .members
        .iter()
        .map(|p| Ok((member_name(p), Arc::new(load_model(p)?))))
        .collect::<Result<Vec<_>>>()?;
    Composite::new(members, manifest.normalization.clone())
}

pub fn member_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| PathBuf::from(path).display().to_string())
}
