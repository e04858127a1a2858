//! Dense voxel grids, bit-packed binary masks and the morphology the rest of
//! the crate is built on.
//!
//! Every flat buffer is laid out with x varying fastest, then y, then z:
//! `index = x + nx * (y + ny * z)`.

use crate::error::{Error, Result};

/// Voxel counts along x, y and z.
pub type Dims = [usize; 3];

#[inline]
pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
fn flat(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

#[inline]
fn unflat(dims: Dims, i: usize) -> [usize; 3] {
    let x = i % dims[0];
    let r = i / dims[0];
    [x, r % dims[1], r / dims[1]]
}

/// A dense 3D array.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dims: Dims,
    data: Vec<T>,
}

/// Class labels, `0` is background.
pub type LabelGrid = Grid<u8>;
/// Normalized intensities in `[0, 1]`.
pub type IntensityGrid = Grid<f32>;

impl<T: Copy + Default> Grid<T> {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![T::default(); voxel_count(dims)],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != voxel_count(dims) {
            return Err(Error::Config(format!(
                "grid {:?} needs {} values, got {}",
                dims,
                voxel_count(dims),
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        flat(self.dims, x, y, z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[flat(self.dims, x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = flat(self.dims, x, y, z);
        self.data[i] = v;
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }
}

impl LabelGrid {
    pub fn max_label(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Mask of voxels equal to `class_id`, in the grid's frame.
    pub fn class_mask(&self, class_id: u8) -> BinaryMask {
        let mut m = BinaryMask::new(self.dims);
        for (i, &v) in self.data.iter().enumerate() {
            if v == class_id {
                m.set_index(i, true);
            }
        }
        m
    }

    /// Centroid of every voxel carrying `class_id`, or `None` when absent.
    pub fn class_centroid(&self, class_id: u8) -> Option<Centroid> {
        let mut sum = [0u64; 3];
        let mut n = 0u64;
        for (i, &v) in self.data.iter().enumerate() {
            if v == class_id {
                let c = unflat(self.dims, i);
                for a in 0..3 {
                    sum[a] += c[a] as u64;
                }
                n += 1;
            }
        }
        (n > 0).then(|| Centroid::from_sums(sum, n))
    }

    /// Per-label voxel histogram (index = label).
    pub fn histogram(&self) -> [usize; 256] {
        let mut h = [0usize; 256];
        for &v in &self.data {
            h[v as usize] += 1;
        }
        h
    }
}

/// Inclusive axis-aligned voxel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BBox3 {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BBox3 {
    pub fn extent(&self) -> Dims {
        [
            self.max[0] - self.min[0] + 1,
            self.max[1] - self.min[1] + 1,
            self.max[2] - self.min[2] + 1,
        ]
    }

    fn include(&mut self, c: [usize; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(c[a]);
            self.max[a] = self.max[a].max(c[a]);
        }
    }
}

/// Real-valued voxel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Centroid {
    pub p: [f64; 3],
}

impl Centroid {
    fn from_sums(sum: [u64; 3], n: u64) -> Self {
        let n = n as f64;
        Self {
            p: [sum[0] as f64 / n, sum[1] as f64 / n, sum[2] as f64 / n],
        }
    }

    /// Maps into `[0, 1]^3` by dividing by `dims - 1`. A singleton axis maps to 0.5.
    pub fn normalized(&self, dims: Dims) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = if dims[a] > 1 {
                self.p[a] / (dims[a] - 1) as f64
            } else {
                0.5
            };
        }
        out
    }

    pub fn from_normalized(n: [f64; 3], dims: Dims) -> Self {
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = n[a] * dims[a].saturating_sub(1) as f64;
        }
        Self { p }
    }
}

/// One bit per voxel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    dims: Dims,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("dims", &self.dims)
            .field("count", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            words: vec![0; voxel_count(dims).div_ceil(64)],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut m = Self::new(dims);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if f(x, y, z) {
                        m.set(x, y, z, true);
                    }
                }
            }
        }
        m
    }

    /// Solid box covering `dims`.
    pub fn full(dims: Dims) -> Self {
        Self::from_fn(dims, |_, _, _| true)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        voxel_count(self.dims)
    }

    pub fn coords(&self, i: usize) -> [usize; 3] {
        unflat(self.dims, i)
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        flat(self.dims, x, y, z)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, v: bool) {
        let bit = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.get_index(flat(self.dims, x, y, z))
    }

    /// Bounds-checked lookup with signed coordinates; out of range reads as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> bool {
        if x < 0
            || y < 0
            || z < 0
            || x as usize >= self.dims[0]
            || y as usize >= self.dims[1]
            || z as usize >= self.dims[2]
        {
            return false;
        }
        self.get(x as usize, y as usize, z as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        self.set_index(flat(self.dims, x, y, z), v)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Flat indices of set voxels in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn iter_coords(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let dims = self.dims;
        self.iter_ones().map(move |i| unflat(dims, i))
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    pub fn subtract(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
        Ok(())
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(self.dims, other.dims));
        }
        Ok(())
    }

    pub fn bbox(&self) -> Option<BBox3> {
        let mut it = self.iter_coords();
        let first = it.next()?;
        let mut b = BBox3 {
            min: first,
            max: first,
        };
        for c in it {
            b.include(c);
        }
        Some(b)
    }

    /// Centroid of set voxels in this mask's own frame.
    pub fn centroid(&self) -> Option<Centroid> {
        let (sum, n) = self.coord_sums();
        (n > 0).then(|| Centroid::from_sums(sum, n))
    }

    /// Integer coordinate sums and voxel count; exact, so every consumer gets
    /// bit-identical centroids.
    pub fn coord_sums(&self) -> ([u64; 3], u64) {
        let mut sum = [0u64; 3];
        let mut n = 0u64;
        for c in self.iter_coords() {
            for a in 0..3 {
                sum[a] += c[a] as u64;
            }
            n += 1;
        }
        (sum, n)
    }

    /// Copy of the region `bbox` grown by `margin` on every face. Voxels past
    /// this mask's own bounds read as background.
    pub fn crop(&self, bbox: BBox3, margin: usize) -> BinaryMask {
        let e = bbox.extent();
        let out_dims = [e[0] + 2 * margin, e[1] + 2 * margin, e[2] + 2 * margin];
        let mut out = BinaryMask::new(out_dims);
        for c in self.iter_coords() {
            if (0..3).all(|a| c[a] >= bbox.min[a] && c[a] <= bbox.max[a]) {
                out.set(
                    c[0] - bbox.min[0] + margin,
                    c[1] - bbox.min[1] + margin,
                    c[2] - bbox.min[2] + margin,
                    true,
                );
            }
        }
        out
    }

    /// Tight bounding box plus `margin`; `None` for an empty mask.
    pub fn crop_tight(&self, margin: usize) -> Option<BinaryMask> {
        self.bbox().map(|b| self.crop(b, margin))
    }

    /// Places this mask at `offset` inside a frame of `frame` dims, clipping
    /// voxels that land outside.
    pub fn placed(&self, frame: Dims, offset: [i64; 3]) -> BinaryMask {
        let mut out = BinaryMask::new(frame);
        for c in self.iter_coords() {
            if let Some(p) = translate(c, offset, frame) {
                out.set(p[0], p[1], p[2], true);
            }
        }
        out
    }
}

/// `c + offset` if it lies inside `frame`.
#[inline]
pub fn translate(c: [usize; 3], offset: [i64; 3], frame: Dims) -> Option<[usize; 3]> {
    let mut p = [0usize; 3];
    for a in 0..3 {
        let v = c[a] as i64 + offset[a];
        if v < 0 || v >= frame[a] as i64 {
            return None;
        }
        p[a] = v as usize;
    }
    Some(p)
}

/// One connected component, stored cropped to its tight bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Position of `mask`'s (0,0,0) in the source grid.
    pub origin: [usize; 3],
    pub mask: BinaryMask,
    pub voxels: usize,
}

impl Component {
    /// The component expressed as a mask over the full source frame.
    pub fn to_frame(&self, dims: Dims) -> BinaryMask {
        let o = self.origin.map(|v| v as i64);
        self.mask.placed(dims, o)
    }
}

fn find(parent: &mut [u32], mut a: u32) -> u32 {
    while parent[a as usize] != a {
        let p = parent[a as usize];
        parent[a as usize] = parent[p as usize];
        a = p;
    }
    a
}

/// 26-connected components of the voxels equal to `class_id`.
///
/// Components come back largest first; equal sizes are ordered by their
/// smallest flat index. An absent class yields an empty list.
pub fn connected_components(grid: &LabelGrid, class_id: u8) -> Vec<Component> {
    let dims = grid.dims();
    let [nx, ny, nz] = dims;
    let data = grid.data();
    const NONE: u32 = u32::MAX;
    let mut label = vec![NONE; data.len()];
    let mut parent: Vec<u32> = Vec::new();

    // Two-pass union-find: only the 13 neighbours already visited in scan order.
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = flat(dims, x, y, z);
                if data[i] != class_id {
                    continue;
                }
                let mut cur = NONE;
                for dz in -1i64..=0 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)) {
                                continue;
                            }
                            let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                            if qx < 0
                                || qy < 0
                                || qz < 0
                                || qx >= nx as i64
                                || qy >= ny as i64
                            {
                                continue;
                            }
                            let j = flat(dims, qx as usize, qy as usize, qz as usize);
                            let l = label[j];
                            if l == NONE {
                                continue;
                            }
                            if cur == NONE {
                                cur = find(&mut parent, l);
                            } else {
                                let (ra, rb) = (find(&mut parent, cur), find(&mut parent, l));
                                if ra != rb {
                                    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                                    parent[hi as usize] = lo;
                                    cur = lo;
                                }
                            }
                        }
                    }
                }
                if cur == NONE {
                    cur = parent.len() as u32;
                    parent.push(cur);
                }
                label[i] = cur;
            }
        }
    }

    struct Acc {
        count: usize,
        first: usize,
        bbox: BBox3,
    }
    let mut root_slot = vec![NONE; parent.len()];
    let mut accs: Vec<Acc> = Vec::new();
    for i in 0..label.len() {
        if label[i] == NONE {
            continue;
        }
        let r = find(&mut parent, label[i]);
        label[i] = r;
        let c = unflat(dims, i);
        let slot = root_slot[r as usize];
        if slot == NONE {
            root_slot[r as usize] = accs.len() as u32;
            accs.push(Acc {
                count: 1,
                first: i,
                bbox: BBox3 { min: c, max: c },
            });
        } else {
            let a = &mut accs[slot as usize];
            a.count += 1;
            a.bbox.include(c);
        }
    }

    let mut masks: Vec<BinaryMask> = accs
        .iter()
        .map(|a| BinaryMask::new(a.bbox.extent()))
        .collect();
    for i in 0..label.len() {
        if label[i] == NONE {
            continue;
        }
        let slot = root_slot[label[i] as usize] as usize;
        let b = accs[slot].bbox;
        let c = unflat(dims, i);
        masks[slot].set(c[0] - b.min[0], c[1] - b.min[1], c[2] - b.min[2], true);
    }

    let mut out: Vec<(usize, Component)> = accs
        .into_iter()
        .zip(masks)
        .map(|(a, mask)| {
            (
                a.first,
                Component {
                    origin: a.bbox.min,
                    mask,
                    voxels: a.count,
                },
            )
        })
        .collect();
    out.sort_by(|a, b| b.1.voxels.cmp(&a.1.voxels).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(_, c)| c).collect()
}

/// Intersection over union. Two empty masks give 0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let union = a.count() + b.count() - inter;
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

const FACE_NEIGHBOURS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// One step of 6-neighbourhood erosion; the grid border counts as outside.
pub fn erode(m: &BinaryMask) -> BinaryMask {
    let mut out = BinaryMask::new(m.dims());
    for c in m.iter_coords() {
        let interior = FACE_NEIGHBOURS.iter().all(|d| {
            m.get_signed(c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2])
        });
        if interior {
            out.set(c[0], c[1], c[2], true);
        }
    }
    out
}

/// Set voxels with at least one 6-neighbour outside the mask or the grid.
pub fn boundary_voxels(m: &BinaryMask) -> BinaryMask {
    let mut out = m.clone();
    out.subtract(&erode(m)).expect("same dims");
    out
}

/// Voxels within `thickness` erosion steps of the outside: `m` minus `m` eroded
/// `thickness` times. A thickness of 1 equals [`boundary_voxels`].
pub fn shell(m: &BinaryMask, thickness: usize) -> BinaryMask {
    let mut core = m.clone();
    for _ in 0..thickness {
        if core.is_empty() {
            break;
        }
        core = erode(&core);
    }
    let mut out = m.clone();
    out.subtract(&core).expect("same dims");
    out
}

/// Writes `class_id` at every in-bounds voxel of `m` shifted by `offset`.
/// Returns the number of voxels written; out-of-bounds voxels are dropped.
pub fn overlay(dst: &mut LabelGrid, m: &BinaryMask, offset: [i64; 3], class_id: u8) -> usize {
    let dims = dst.dims();
    let mut written = 0;
    for c in m.iter_coords() {
        if let Some(p) = translate(c, offset, dims) {
            dst.set(p[0], p[1], p[2], class_id);
            written += 1;
        }
    }
    written
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_grid(dims: Dims, lo: usize, hi: usize, class: u8) -> LabelGrid {
        let mut g = LabelGrid::new(dims);
        for z in lo..hi {
            for y in lo..hi {
                for x in lo..hi {
                    g.set(x, y, z, class);
                }
            }
        }
        g
    }

    #[test]
    fn flat_index_is_x_fastest() {
        let g = Grid::<u8>::new([4, 3, 2]);
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn solid_cube_is_one_component() {
        let g = cube_grid([8, 8, 8], 2, 5, 4);
        let cc = connected_components(&g, 4);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].voxels, 27);
        assert_eq!(cc[0].origin, [2, 2, 2]);
        assert_eq!(cc[0].mask.dims(), [3, 3, 3]);
    }

    #[test]
    fn separated_voxels_are_distinct_components() {
        let mut g = LabelGrid::new([6, 3, 3]);
        g.set(0, 1, 1, 2);
        g.set(3, 1, 1, 2);
        let cc = connected_components(&g, 2);
        assert_eq!(cc.len(), 2);
        assert!(cc.iter().all(|c| c.voxels == 1));
        // equal sizes: smaller flat index first
        assert_eq!(cc[0].origin, [0, 1, 1]);
        assert_eq!(cc[1].origin, [3, 1, 1]);
    }

    #[test]
    fn diagonal_corner_touch_merges() {
        let mut g = LabelGrid::new([3, 3, 3]);
        g.set(0, 0, 0, 1);
        g.set(1, 1, 1, 1);
        g.set(2, 0, 2, 1);
        assert_eq!(connected_components(&g, 1).len(), 1);
    }

    #[test]
    fn absent_class_gives_no_components() {
        let g = cube_grid([4, 4, 4], 0, 2, 1);
        assert!(connected_components(&g, 9).is_empty());
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_fn([6, 4, 4], |x, y, z| x < 2 && y < 2 && z < 2);
        let b = BinaryMask::from_fn([6, 4, 4], |x, y, z| (1..3).contains(&x) && y < 2 && z < 2);
        let d = BinaryMask::from_fn([6, 4, 4], |x, _, _| x == 5);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &d).unwrap(), 0.0);
        assert!((iou(&a, &b).unwrap() - 4.0 / 12.0).abs() < 1e-12);
        assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
        let other = BinaryMask::new([2, 2, 2]);
        assert!(matches!(iou(&a, &other), Err(Error::DimMismatch(..))));
    }

    #[test]
    fn boundary_cases() {
        let one = BinaryMask::full([1, 1, 1]);
        assert_eq!(boundary_voxels(&one), one);

        let cube = BinaryMask::full([3, 3, 3]);
        let b = boundary_voxels(&cube);
        assert_eq!(b.count(), 26);
        assert!(!b.get(1, 1, 1));

        let padded = BinaryMask::from_fn([7, 7, 7], |x, y, z| {
            (1..6).contains(&x) && (1..6).contains(&y) && (1..6).contains(&z)
        });
        let hollow = boundary_voxels(&padded);
        assert_eq!(hollow.count(), 125 - 27);
        assert_eq!(boundary_voxels(&hollow), hollow);
    }

    #[test]
    fn shell_thickness() {
        let cube = BinaryMask::full([5, 5, 5]);
        assert_eq!(shell(&cube, 1), boundary_voxels(&cube));
        assert_eq!(shell(&cube, 1).count(), 98);
        assert_eq!(shell(&cube, 2).count(), 124);
        assert_eq!(shell(&cube, 3).count(), 125);
    }

    #[test]
    fn overlay_last_writer_wins_and_clips() {
        let mut g = LabelGrid::new([4, 4, 4]);
        let m = BinaryMask::full([2, 2, 2]);
        assert_eq!(overlay(&mut g, &m, [1, 1, 1], 2), 8);
        assert_eq!(overlay(&mut g, &m, [1, 1, 1], 5), 8);
        assert_eq!(g.histogram()[5], 8);
        assert_eq!(g.histogram()[2], 0);

        let mut g = LabelGrid::new([4, 4, 4]);
        assert_eq!(overlay(&mut g, &m, [3, 3, -1], 1), 1);
        assert_eq!(g.get(3, 3, 0), 1);
    }

    #[test]
    fn crop_pads_past_frame() {
        let m = BinaryMask::from_fn([4, 4, 4], |x, y, z| x == 0 && y == 0 && z == 0);
        let c = m.crop_tight(1).unwrap();
        assert_eq!(c.dims(), [3, 3, 3]);
        assert!(c.get(1, 1, 1));
        assert_eq!(c.count(), 1);
    }

    #[test]
    fn centroid_normalization() {
        let mut g = LabelGrid::new([9, 9, 9]);
        g.set(4, 4, 4, 1);
        let c = g.class_centroid(1).unwrap();
        assert_eq!(c.normalized([9, 9, 9]), [0.5, 0.5, 0.5]);
        assert!(g.class_centroid(2).is_none());
    }
}
