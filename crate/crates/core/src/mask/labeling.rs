use super::{BinaryMask, Connectivity, LabelMap};

pub(crate) const NO_REGION: u32 = u32::MAX;

/// One maximal connected set of same-class pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub class_id: u16,
    /// Index within its class, ordered by the row-major position of the first pixel.
    pub region_id: u32,
    /// Sorted row-major pixel indices.
    pub pixels: Vec<u32>,
}

impl Region {
    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn coords(&self, width: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pixels
            .iter()
            .map(move |&p| (p as usize / width, p as usize % width))
    }
}

/// The connected regions of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSet {
    pub class_id: u16,
    pub width: usize,
    pub height: usize,
    pub connectivity: Connectivity,
    pub regions: Vec<Region>,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn areas(&self) -> Vec<u64> {
        self.regions.iter().map(|r| r.pixels.len() as u64).collect()
    }

    /// Dense per-pixel region index, `NO_REGION` outside every region.
    pub(crate) fn dense_labels(&self) -> Vec<u32> {
        let mut out = vec![NO_REGION; self.width * self.height];
        for r in &self.regions {
            for &p in &r.pixels {
                out[p as usize] = r.region_id;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Component {
    pub class: u16,
    pub local_id: u32,
    pub area: u64,
}

/// Connected regions of every class of a label map, computed in one raster pass.
///
/// Component indices are global across classes; `per_class[k]` lists the
/// components of class `k` in region-id order.
#[derive(Debug, Clone)]
pub struct Labeling {
    width: usize,
    height: usize,
    connectivity: Connectivity,
    labels: Vec<u32>,
    components: Vec<Component>,
    per_class: Vec<Vec<u32>>,
}

impl Labeling {
    /// Labels every pixel holding an ordinary class id. Ignore and unknown pixels
    /// belong to no region.
    pub fn new(map: &LabelMap, connectivity: Connectivity) -> Self {
        let k = map.num_classes();
        let data = map.data();
        let (labels, comps) = label_raster(map.width(), map.height(), connectivity, |i| {
            let v = data[i];
            (v < k).then_some(v)
        });
        let mut per_class = vec![Vec::new(); k as usize];
        let components = comps
            .into_iter()
            .enumerate()
            .map(|(idx, (class, area))| {
                let list = &mut per_class[class as usize];
                let local_id = list.len() as u32;
                list.push(idx as u32);
                Component { class, local_id, area }
            })
            .collect();
        Self {
            width: map.width(),
            height: map.height(),
            connectivity,
            labels,
            components,
            per_class,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    /// Number of regions of class `class`.
    pub fn region_count(&self, class: u16) -> usize {
        self.per_class.get(class as usize).map(Vec::len).unwrap_or(0)
    }

    /// Areas of the regions of `class`, in region-id order.
    pub fn areas(&self, class: u16) -> Vec<u64> {
        self.per_class
            .get(class as usize)
            .map(|ids| ids.iter().map(|&c| self.components[c as usize].area).collect())
            .unwrap_or_default()
    }

    pub(crate) fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn total_regions(&self) -> usize {
        self.components.len()
    }

    /// Materializes the regions of one class with their pixel lists.
    pub fn region_set(&self, class: u16) -> RegionSet {
        let mut regions: Vec<Region> = self
            .per_class
            .get(class as usize)
            .map(|ids| {
                ids.iter()
                    .map(|&c| {
                        let comp = self.components[c as usize];
                        Region {
                            class_id: class,
                            region_id: comp.local_id,
                            pixels: Vec::with_capacity(comp.area as usize),
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        if !regions.is_empty() {
            for (i, &l) in self.labels.iter().enumerate() {
                if l == NO_REGION {
                    continue;
                }
                let comp = self.components[l as usize];
                if comp.class == class {
                    regions[comp.local_id as usize].pixels.push(i as u32);
                }
            }
        }
        RegionSet {
            class_id: class,
            width: self.width,
            height: self.height,
            connectivity: self.connectivity,
            regions,
        }
    }
}

/// Maximal connected foreground components of a binary mask.
///
/// Regions are numbered by the row-major position of their first pixel.
pub fn connected_components(mask: &BinaryMask, class_id: u16, connectivity: Connectivity) -> RegionSet {
    let data = mask.data();
    let (labels, comps) = label_raster(mask.width(), mask.height(), connectivity, |i| data[i].then_some(0));
    let mut regions: Vec<Region> = comps
        .iter()
        .enumerate()
        .map(|(id, &(_, area))| Region {
            class_id,
            region_id: id as u32,
            pixels: Vec::with_capacity(area as usize),
        })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        if l != NO_REGION {
            regions[l as usize].pixels.push(i as u32);
        }
    }
    RegionSet {
        class_id,
        width: mask.width(),
        height: mask.height(),
        connectivity,
        regions,
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    // smaller provisional label wins, so a root is always its component's first label
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass union-find labeling. `key(i)` gives the class of pixel `i`, or
/// `None` when the pixel belongs to no region; neighbours join when their keys
/// are equal.
///
/// Returns the dense label image (`NO_REGION` for unlabeled pixels) and, per
/// component in first-pixel order, its `(class, area)`.
pub(crate) fn label_raster(
    width: usize,
    height: usize,
    connectivity: Connectivity,
    key: impl Fn(usize) -> Option<u16>,
) -> (Vec<u32>, Vec<(u16, u64)>) {
    assert!(width * height < NO_REGION as usize, "image too large to label");
    let mut labels = vec![NO_REGION; width * height];
    let mut parent: Vec<u32> = Vec::new();
    let mut classes: Vec<u16> = Vec::new();
    let offsets = connectivity.backward_offsets();

    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            let Some(k) = key(i) else { continue };
            let mut current = NO_REGION;
            for &(dr, dc) in offsets {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 || nc >= width as isize {
                    continue;
                }
                let j = nr as usize * width + nc as usize;
                let l = labels[j];
                if l == NO_REGION || classes[l as usize] != k {
                    continue;
                }
                current = if current == NO_REGION {
                    find(&mut parent, l)
                } else {
                    union(&mut parent, current, l)
                };
            }
            if current == NO_REGION {
                current = parent.len() as u32;
                parent.push(current);
                classes.push(k);
            }
            labels[i] = current;
        }
    }

    let mut final_id = vec![NO_REGION; parent.len()];
    let mut comps: Vec<(u16, u64)> = Vec::new();
    for l in labels.iter_mut() {
        if *l == NO_REGION {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if final_id[root] == NO_REGION {
            final_id[root] = comps.len() as u32;
            comps.push((classes[root], 0));
        }
        let id = final_id[root];
        comps[id as usize].1 += 1;
        *l = id;
    }
    (labels, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{binarize_class, DEFAULT_IGNORE};
    use std::collections::VecDeque;

    fn mask(w: usize, h: usize, bits: &[u8]) -> BinaryMask {
        BinaryMask::new(w, h, bits.iter().map(|&b| b != 0).collect()).unwrap()
    }

    /// BFS flood fill from each unvisited foreground pixel in raster order.
    fn flood_fill_regions(m: &BinaryMask, conn: Connectivity) -> Vec<Vec<u32>> {
        let (w, h) = (m.width(), m.height());
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        for start in 0..w * h {
            if !m.data()[start] || seen[start] {
                continue;
            }
            let mut pixels = vec![];
            let mut q = VecDeque::from([start]);
            seen[start] = true;
            while let Some(p) = q.pop_front() {
                pixels.push(p as u32);
                let (r, c) = ((p / w) as isize, (p % w) as isize);
                for &(dr, dc) in conn.offsets() {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if m.data()[j] && !seen[j] {
                        seen[j] = true;
                        q.push_back(j);
                    }
                }
            }
            pixels.sort_unstable();
            out.push(pixels);
        }
        out
    }

    #[test]
    fn empty_mask_has_no_regions() {
        let m = mask(3, 3, &[0; 9]);
        assert!(connected_components(&m, 1, Connectivity::Eight).is_empty());
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let m = mask(2, 2, &[1, 0, 0, 1]);
        assert_eq!(connected_components(&m, 1, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&m, 1, Connectivity::Four).len(), 2);
    }

    #[test]
    fn u_shape_merges_late() {
        #[rustfmt::skip]
        let m = mask(5, 3, &[
            1, 0, 1, 0, 1,
            1, 0, 1, 0, 1,
            1, 1, 1, 1, 1,
        ]);
        let rs = connected_components(&m, 1, Connectivity::Four);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.regions[0].pixel_count(), 11);
    }

    #[test]
    fn region_ids_follow_first_pixel_order() {
        #[rustfmt::skip]
        let m = mask(5, 3, &[
            0, 0, 0, 1, 1,
            1, 0, 0, 0, 0,
            1, 0, 1, 0, 0,
        ]);
        let rs = connected_components(&m, 1, Connectivity::Four);
        let firsts: Vec<u32> = rs.regions.iter().map(|r| r.pixels[0]).collect();
        assert_eq!(firsts, vec![3, 5, 12]);
    }

    #[test]
    fn random_masks_match_flood_fill() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..32 * 32).map(|_| rng.random_bool(0.45) as u8).collect();
            let m = mask(32, 32, &bits);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let rs = connected_components(&m, 1, conn);
                let oracle = flood_fill_regions(&m, conn);
                let got: Vec<Vec<u32>> = rs.regions.into_iter().map(|r| r.pixels).collect();
                assert_eq!(got, oracle);
            }
        }
    }

    #[test]
    fn multi_class_labeling_matches_per_class_components() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let data: Vec<u16> = (0..40 * 24)
                .map(|_| match rng.random_range(0..10) {
                    9 => DEFAULT_IGNORE,
                    v => (v % 4) as u16,
                })
                .collect();
            let map = LabelMap::new(40, 24, 4, DEFAULT_IGNORE, data).unwrap();
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let lab = Labeling::new(&map, conn);
                for k in 1..4 {
                    let expected = connected_components(&binarize_class(&map, k).unwrap(), k, conn);
                    assert_eq!(lab.region_set(k), expected);
                    assert_eq!(lab.areas(k), expected.areas());
                }
            }
        }
    }
}
