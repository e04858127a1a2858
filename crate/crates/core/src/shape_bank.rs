//! The shape bank: cropped per-instance organ masks harvested from label-only
//! volumes, plus the geometric augmentation applied whenever one is drawn.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;

use crate::error::{Error, Result};
use crate::volume::{connected_components, BinaryMask, Dims, LabelGrid};

/// Components smaller than this are treated as segmentation speckle.
pub const DEFAULT_MIN_COMPONENT: usize = 8;

const MARGIN: usize = 1;
const BANK_MAGIC: &[u8; 8] = b"AFBANK\x00\x01";

/// A labeled source volume and an identifier carried into the bank.
#[derive(Clone, Debug)]
pub struct Subject {
    pub id: String,
    pub labels: LabelGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEntry {
    /// Remapped class in `1..=C`.
    pub class_id: u8,
    pub raw_class: u8,
    pub source_id: String,
    /// Tight crop of one connected component with a one-voxel empty margin.
    pub mask: BinaryMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeBank {
    entries: Vec<ShapeEntry>,
    /// raw label -> class id
    class_map: BTreeMap<u8, u8>,
    by_class: Vec<Vec<usize>>,
}

impl ShapeBank {
    /// Assembles a bank, checking that the class map is a bijection onto
    /// `1..=C` and that every class has at least one non-empty entry.
    pub fn new(entries: Vec<ShapeEntry>, class_map: BTreeMap<u8, u8>) -> Result<Self> {
        let c = class_map.len();
        let mut seen = vec![false; c + 1];
        for &id in class_map.values() {
            if id == 0 || id as usize > c || seen[id as usize] {
                return Err(Error::BankFormat(format!(
                    "class map is not a bijection onto 1..={c}"
                )));
            }
            seen[id as usize] = true;
        }
        let mut by_class = vec![Vec::new(); c + 1];
        for (i, e) in entries.iter().enumerate() {
            if e.class_id == 0 || e.class_id as usize > c {
                return Err(Error::UnknownClass(e.class_id));
            }
            if class_map.get(&e.raw_class) != Some(&e.class_id) {
                return Err(Error::BankFormat(format!(
                    "entry {i} raw class {} does not map to {}",
                    e.raw_class, e.class_id
                )));
            }
            if e.mask.is_empty() {
                return Err(Error::BankFormat(format!("entry {i} has an empty mask")));
            }
            by_class[e.class_id as usize].push(i);
        }
        if let Some(id) = (1..=c).find(|&id| by_class[id].is_empty()) {
            return Err(Error::BankFormat(format!("class {id} has no entries")));
        }
        Ok(Self {
            entries,
            class_map,
            by_class,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_map.len()
    }

    pub fn entries(&self) -> &[ShapeEntry] {
        &self.entries
    }

    pub fn class_map(&self) -> &BTreeMap<u8, u8> {
        &self.class_map
    }

    pub fn raw_label(&self, class_id: u8) -> Option<u8> {
        self.class_map
            .iter()
            .find_map(|(&raw, &id)| (id == class_id).then_some(raw))
    }

    pub fn entries_of(&self, class_id: u8) -> Result<impl Iterator<Item = &ShapeEntry>> {
        let idx = self
            .by_class
            .get(class_id as usize)
            .filter(|v| class_id != 0 && !v.is_empty())
            .ok_or(Error::UnknownClass(class_id))?;
        Ok(idx.iter().map(|&i| &self.entries[i]))
    }

    pub fn mean_entry_volume(&self, class_id: u8) -> Result<f64> {
        let (n, sum) = self
            .entries_of(class_id)?
            .fold((0usize, 0usize), |(n, s), e| (n + 1, s + e.mask.count()));
        Ok(sum as f64 / n as f64)
    }

    /// Serializes to the `.bank` binary layout (little-endian):
    /// magic, `C`, entry count, `C` pairs of (raw, class), then per entry
    /// class, raw, source id, dims and the mask bit-packed LSB-first in flat order.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(BANK_MAGIC)?;
        w.write_u32::<LittleEndian>(self.class_map.len() as u32)?;
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for (&raw, &id) in &self.class_map {
            w.write_u8(raw)?;
            w.write_u8(id)?;
        }
        for e in &self.entries {
            w.write_u8(e.class_id)?;
            w.write_u8(e.raw_class)?;
            let src = e.source_id.as_bytes();
            w.write_u16::<LittleEndian>(src.len() as u16)?;
            w.write_all(src)?;
            for d in e.mask.dims() {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            w.write_all(&pack_bits(&e.mask))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::BankFormat(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BANK_MAGIC {
            return Err(bad("bad magic"));
        }
        let c = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut class_map = BTreeMap::new();
        for _ in 0..c {
            let raw = r.read_u8()?;
            let id = r.read_u8()?;
            if class_map.insert(raw, id).is_some() {
                return Err(bad("duplicate raw label in class map"));
            }
        }
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let class_id = r.read_u8()?;
            let raw_class = r.read_u8()?;
            let len = r.read_u16::<LittleEndian>()? as usize;
            let mut src = vec![0u8; len];
            r.read_exact(&mut src)?;
            let source_id = String::from_utf8(src).map_err(|_| bad("source id is not UTF-8"))?;
            let mut dims = [0usize; 3];
            for d in &mut dims {
                *d = r.read_u32::<LittleEndian>()? as usize;
            }
            if dims.contains(&0) {
                return Err(bad("zero-sized mask"));
            }
            let mut bytes = vec![0u8; (dims[0] * dims[1] * dims[2]).div_ceil(8)];
            r.read_exact(&mut bytes)?;
            entries.push(ShapeEntry {
                class_id,
                raw_class,
                source_id,
                mask: unpack_bits(dims, &bytes),
            });
        }
        Self::new(entries, class_map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    /// Plaintext sidecar: one `raw_label class_id entries` row per class.
    pub fn class_map_text(&self) -> String {
        let mut s = String::from("# raw_label class_id entries\n");
        for (&raw, &id) in &self.class_map {
            s.push_str(&format!("{raw} {id} {}\n", self.by_class[id as usize].len()));
        }
        s
    }
}

fn pack_bits(m: &BinaryMask) -> Vec<u8> {
    let mut out = vec![0u8; m.len().div_ceil(8)];
    for i in m.iter_ones() {
        out[i >> 3] |= 1 << (i & 7);
    }
    out
}

fn unpack_bits(dims: Dims, bytes: &[u8]) -> BinaryMask {
    let mut m = BinaryMask::new(dims);
    for i in 0..m.len() {
        if (bytes[i >> 3] >> (i & 7)) & 1 == 1 {
            m.set_index(i, true);
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankOptions {
    pub min_component: usize,
}

impl Default for BankOptions {
    fn default() -> Self {
        Self {
            min_component: DEFAULT_MIN_COMPONENT,
        }
    }
}

/// Harvests every connected instance of the selected raw classes.
///
/// Raw labels are remapped to `1..=C` in ascending raw order. Fails with the
/// full list of classes that no source contains (or whose every component
/// falls below `min_component`).
pub fn build_bank(subjects: &[Subject], raw_classes: &[u8], opts: BankOptions) -> Result<ShapeBank> {
    if subjects.is_empty() {
        return Err(Error::Config("no source volumes".into()));
    }
    let mut raws: Vec<u8> = raw_classes.to_vec();
    raws.sort_unstable();
    raws.dedup();
    if raws.is_empty() || raws.contains(&0) {
        return Err(Error::Config(
            "class list must be non-empty and exclude background 0".into(),
        ));
    }
    let class_map: BTreeMap<u8, u8> = raws
        .iter()
        .enumerate()
        .map(|(i, &raw)| (raw, (i + 1) as u8))
        .collect();

    let mut entries = Vec::new();
    for subject in subjects {
        for (&raw, &id) in &class_map {
            for comp in connected_components(&subject.labels, raw) {
                if comp.voxels < opts.min_component {
                    continue;
                }
                let mask = comp.mask.crop_tight(MARGIN).expect("component is non-empty");
                entries.push(ShapeEntry {
                    class_id: id,
                    raw_class: raw,
                    source_id: subject.id.clone(),
                    mask,
                });
            }
        }
    }
    let missing: Vec<u8> = class_map
        .iter()
        .filter(|(_, &id)| !entries.iter().any(|e| e.class_id == id))
        .map(|(&raw, _)| raw)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    ShapeBank::new(entries, class_map)
}

/// Geometric augmentation applied to every shape drawn from the bank.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentParams {
    /// Independent flip probability for each axis.
    pub flip_prob: f64,
    /// Draw one of the 24 proper axis-aligned rotations.
    pub rotation_enabled: bool,
    /// Isotropic scale factor range, inclusive.
    pub scale_range: [f64; 2],
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            rotation_enabled: true,
            scale_range: [0.85, 1.25],
        }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            flip_prob: 0.0,
            rotation_enabled: false,
            scale_range: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.scale_range;
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!("flip_prob {} outside [0,1]", self.flip_prob)));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("bad scale range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// An axis-aligned rotation: output axis `a` reads input axis `perm[a]`,
/// reversed when `flip[a]` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisRotation {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

/// The 24 proper rotations of the cube, in a fixed order; identity first.
pub fn axis_rotations() -> [AxisRotation; 24] {
    const PERMS: [([usize; 3], bool); 6] = [
        ([0, 1, 2], true),
        ([0, 2, 1], false),
        ([1, 0, 2], false),
        ([1, 2, 0], true),
        ([2, 0, 1], true),
        ([2, 1, 0], false),
    ];
    let mut out = [AxisRotation {
        perm: [0, 1, 2],
        flip: [false; 3],
    }; 24];
    let mut k = 0;
    for (perm, even) in PERMS {
        for bits in 0..8u8 {
            let flip = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
            let odd_flips = flip.iter().filter(|&&f| f).count() % 2 == 1;
            // determinant +1: permutation parity matches flip parity
            if even != odd_flips {
                out[k] = AxisRotation { perm, flip };
                k += 1;
            }
        }
    }
    debug_assert_eq!(k, 24);
    out
}

pub fn rotate(m: &BinaryMask, rot: AxisRotation) -> BinaryMask {
    let d = m.dims();
    let nd = [d[rot.perm[0]], d[rot.perm[1]], d[rot.perm[2]]];
    let mut out = BinaryMask::new(nd);
    for c in m.iter_coords() {
        let mut p = [0usize; 3];
        for a in 0..3 {
            let v = c[rot.perm[a]];
            p[a] = if rot.flip[a] { nd[a] - 1 - v } else { v };
        }
        out.set(p[0], p[1], p[2], true);
    }
    out
}

pub fn flip(m: &BinaryMask, axes: [bool; 3]) -> BinaryMask {
    rotate(
        m,
        AxisRotation {
            perm: [0, 1, 2],
            flip: axes,
        },
    )
}

/// Nearest-neighbour isotropic rescale; each output axis has
/// `max(1, round(n * factor))` voxels.
pub fn rescale(m: &BinaryMask, factor: f64) -> BinaryMask {
    let d = m.dims();
    let nd = d.map(|n| ((n as f64 * factor).round() as usize).max(1));
    let src = |i: usize, n: usize| (((i as f64 + 0.5) / factor).floor() as usize).min(n - 1);
    let xs: Vec<usize> = (0..nd[0]).map(|i| src(i, d[0])).collect();
    let ys: Vec<usize> = (0..nd[1]).map(|i| src(i, d[1])).collect();
    let zs: Vec<usize> = (0..nd[2]).map(|i| src(i, d[2])).collect();
    let mut out = BinaryMask::new(nd);
    for (z, &sz) in zs.iter().enumerate() {
        for (y, &sy) in ys.iter().enumerate() {
            for (x, &sx) in xs.iter().enumerate() {
                if m.get(sx, sy, sz) {
                    out.set(x, y, z, true);
                }
            }
        }
    }
    out
}

/// Flip, rotate, then scale a bank entry; the result is re-cropped to its tight
/// bounds plus a one-voxel margin. A scale that would empty the mask is skipped.
pub fn augment(entry: &ShapeEntry, params: &AugmentParams, rng: &mut impl Rng) -> BinaryMask {
    let mut m = entry.mask.clone();

    let axes = [(); 3].map(|_| rng.random::<f64>() < params.flip_prob);
    if axes.iter().any(|&f| f) {
        m = flip(&m, axes);
    }

    if params.rotation_enabled {
        let rot = axis_rotations()[rng.random_range(0..24)];
        if rot.perm != [0, 1, 2] || rot.flip != [false; 3] {
            m = rotate(&m, rot);
        }
    }

    let [lo, hi] = params.scale_range;
    let factor = if lo < hi { rng.random_range(lo..=hi) } else { lo };
    if factor != 1.0 {
        let scaled = rescale(&m, factor);
        if !scaled.is_empty() {
            m = scaled;
        }
    }

    m.crop_tight(MARGIN).expect("augmented mask is never empty")
}

/// Uniformly picks one entry of `class_id` and augments it.
pub fn sample_shape(
    bank: &ShapeBank,
    class_id: u8,
    params: &AugmentParams,
    rng: &mut impl Rng,
) -> Result<BinaryMask> {
    let idx = bank
        .by_class
        .get(class_id as usize)
        .filter(|v| class_id != 0 && !v.is_empty())
        .ok_or(Error::UnknownClass(class_id))?;
    let pick = idx[rng.random_range(0..idx.len())];
    Ok(augment(&bank.entries[pick], params, rng))
}
