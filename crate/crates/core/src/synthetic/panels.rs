use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::{overlap_graphs, save_label_map, Connectivity, LabelMap, Labeling, DEFAULT_IGNORE};

/// The frozen panel table.
pub const PANEL_TABLE: &str = include_str!("../../data/panels.txt");

/// Panel ids in table order.
pub const PANEL_IDS: [char; 16] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p',
];

/// Class carried by every panel region.
pub const PANEL_CLASS: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    /// Rows `r0..r1`, columns `c0..c1`, end-exclusive.
    Rect { r0: usize, c0: usize, r1: usize, c1: usize },
    /// Pixels with `((r - cr) / rr)^2 + ((c - cc) / rc)^2 <= 1`.
    Ellipse { cr: f64, cc: f64, rr: f64, rc: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub class: u16,
    pub kind: ShapeKind,
}

impl Shape {
    pub fn rect(class: u16, r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        Shape {
            class,
            kind: ShapeKind::Rect { r0, c0, r1, c1 },
        }
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        match self.kind {
            ShapeKind::Rect { r0, c0, r1, c1 } => (r0..r1).contains(&r) && (c0..c1).contains(&c),
            ShapeKind::Ellipse { cr, cc, rr, rc } => {
                let dr = (r as f64 - cr) / rr;
                let dc = (c as f64 - cc) / rc;
                dr * dr + dc * dc <= 1.0
            }
        }
    }

    fn pixels(&self, width: usize, height: usize) -> Vec<usize> {
        (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .filter(|&(r, c)| self.contains(r, c))
            .map(|(r, c)| r * width + c)
            .collect()
    }
}

/// Which ground-truth / predicted region pairs intersect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n: usize,
    pub m: usize,
    /// `(gt, pred)` region ids, sorted.
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub panel_id: char,
    pub width: usize,
    pub height: usize,
    pub num_classes: u16,
    pub gt_layout: Vec<Shape>,
    pub pred_layout: Vec<Shape>,
    pub topology: Topology,
    /// Published ROM of the panel, two decimals.
    pub published_rom: f64,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Generation(format!("panel table line {line}: {msg}"))
}

fn parse_shape(line: usize, class: &str, kind: &str, args: &[&str]) -> Result<Shape> {
    let class: u16 = class.parse().map_err(|e| parse_err(line, e))?;
    if args.len() != 4 {
        return Err(parse_err(line, "shapes take four numbers"));
    }
    let kind = match kind {
        "rect" => {
            let v = args
                .iter()
                .map(|a| a.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(line, e))?;
            ShapeKind::Rect {
                r0: v[0],
                c0: v[1],
                r1: v[2],
                c1: v[3],
            }
        }
        "ellipse" => {
            let v = args
                .iter()
                .map(|a| a.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(line, e))?;
            ShapeKind::Ellipse {
                cr: v[0],
                cc: v[1],
                rr: v[2],
                rc: v[3],
            }
        }
        other => return Err(parse_err(line, format!("unknown shape {other:?}"))),
    };
    Ok(Shape { class, kind })
}

fn parse_topology(line: usize, fields: &[&str]) -> Result<(Topology, f64)> {
    let mut n = None;
    let mut m = None;
    let mut edges = None;
    let mut rom = None;
    for f in fields {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key=value, got {f:?}")))?;
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|e| parse_err(line, e))?),
            "m" => m = Some(v.parse::<usize>().map_err(|e| parse_err(line, e))?),
            "rom" => rom = Some(v.parse::<f64>().map_err(|e| parse_err(line, e))?),
            "edges" => {
                let mut list = Vec::new();
                for e in v.split(',').filter(|e| !e.is_empty()) {
                    let (g, p) = e
                        .split_once('-')
                        .ok_or_else(|| parse_err(line, format!("bad edge {e:?}")))?;
                    list.push((
                        g.parse::<u32>().map_err(|e| parse_err(line, e))?,
                        p.parse::<u32>().map_err(|e| parse_err(line, e))?,
                    ));
                }
                list.sort_unstable();
                edges = Some(list);
            }
            other => return Err(parse_err(line, format!("unknown key {other:?}"))),
        }
    }
    match (n, m, edges, rom) {
        (Some(n), Some(m), Some(edges), Some(rom)) => Ok((Topology { n, m, edges }, rom)),
        _ => Err(parse_err(line, "topology needs n, m, edges and rom")),
    }
}

/// Parses a panel table in the format of [`PANEL_TABLE`].
pub fn parse_panel_table(text: &str) -> Result<Vec<PanelSpec>> {
    let mut canvas: Option<(usize, usize, u16)> = None;
    let mut panels: Vec<PanelSpec> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields[0] == "canvas" {
            let v = fields[1..]
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(line, e))?;
            let [w, h, k] = v[..] else {
                return Err(parse_err(line, "canvas takes width, height and classes"));
            };
            canvas = Some((w, h, k as u16));
            continue;
        }
        let (width, height, num_classes) = canvas.ok_or_else(|| parse_err(line, "canvas must come first"))?;
        let mut id_chars = fields[0].chars();
        let (Some(id), None) = (id_chars.next(), id_chars.next()) else {
            return Err(parse_err(line, format!("bad panel id {:?}", fields[0])));
        };
        if panels.last().map(|p| p.panel_id) != Some(id) {
            if panels.iter().any(|p| p.panel_id == id) {
                return Err(parse_err(line, format!("panel {id} is not contiguous")));
            }
            panels.push(PanelSpec {
                panel_id: id,
                width,
                height,
                num_classes,
                gt_layout: Vec::new(),
                pred_layout: Vec::new(),
                topology: Topology {
                    n: usize::MAX,
                    m: 0,
                    edges: Vec::new(),
                },
                published_rom: f64::NAN,
            });
        }
        let panel = panels.last_mut().unwrap();
        match fields.get(1).copied() {
            Some("gt") | Some("pred") if fields.len() >= 4 => {
                let shape = parse_shape(line, fields[2], fields[3], &fields[4..])?;
                if fields[1] == "gt" {
                    panel.gt_layout.push(shape);
                } else {
                    panel.pred_layout.push(shape);
                }
            }
            Some("topology") => {
                let (t, rom) = parse_topology(line, &fields[2..])?;
                panel.topology = t;
                panel.published_rom = rom;
            }
            _ => return Err(parse_err(line, "expected gt, pred or topology")),
        }
    }
    if let Some(p) = panels.iter().find(|p| p.published_rom.is_nan()) {
        return Err(Error::Generation(format!("panel {} has no topology line", p.panel_id)));
    }
    Ok(panels)
}

/// The sixteen frozen panels.
pub fn canonical_panels() -> Vec<PanelSpec> {
    parse_panel_table(PANEL_TABLE).expect("bundled panel table is valid")
}

pub fn canonical_panel(id: char) -> Option<PanelSpec> {
    canonical_panels().into_iter().find(|p| p.panel_id == id)
}

fn rasterize(layout: &[Shape], spec: &PanelSpec, side: &str) -> Result<LabelMap> {
    let (w, h) = (spec.width, spec.height);
    let mut data = vec![0u16; w * h];
    // owner of each pixel, for the separation check
    let mut owner = vec![usize::MAX; w * h];
    for (idx, shape) in layout.iter().enumerate() {
        if shape.class == 0 || shape.class >= spec.num_classes {
            return Err(Error::Generation(format!(
                "panel {} {side} shape {idx}: class {} is not a foreground class",
                spec.panel_id, shape.class
            )));
        }
        let pixels = shape.pixels(w, h);
        if pixels.is_empty() {
            return Err(Error::Generation(format!(
                "panel {} {side} shape {idx} is empty or off canvas",
                spec.panel_id
            )));
        }
        if let ShapeKind::Rect { r1, c1, .. } = shape.kind {
            if r1 > h || c1 > w {
                return Err(Error::Generation(format!(
                    "panel {} {side} shape {idx} leaves the canvas",
                    spec.panel_id
                )));
            }
        }
        for &p in &pixels {
            let (r, c) = ((p / w) as isize, (p % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let o = owner[rr as usize * w + cc as usize];
                    if o != usize::MAX && o != idx {
                        return Err(Error::Generation(format!(
                            "panel {} {side} shapes {o} and {idx} touch",
                            spec.panel_id
                        )));
                    }
                }
            }
        }
        for &p in &pixels {
            owner[p] = idx;
            data[p] = shape.class;
        }
    }
    LabelMap::new(w, h, spec.num_classes, DEFAULT_IGNORE, data)
}

/// Overlap topology of class [`PANEL_CLASS`] under 8-connectivity.
pub fn realized_topology(gt: &LabelMap, pred: &LabelMap) -> Result<Topology> {
    let conn = Connectivity::Eight;
    let graphs = overlap_graphs(&Labeling::new(gt, conn), &Labeling::new(pred, conn), gt.num_classes())?;
    let g = &graphs[PANEL_CLASS as usize];
    Ok(Topology {
        n: g.gt_count(),
        m: g.pred_count(),
        edges: g.edges().iter().map(|e| (e.gt, e.pred)).collect(),
    })
}

/// Rasterizes a panel and checks that it realizes its declared topology.
pub fn generate_panel(spec: &PanelSpec) -> Result<(LabelMap, LabelMap)> {
    let gt = rasterize(&spec.gt_layout, spec, "gt")?;
    let pred = rasterize(&spec.pred_layout, spec, "pred")?;
    let classes: BTreeSet<u16> = spec
        .gt_layout
        .iter()
        .chain(&spec.pred_layout)
        .map(|s| s.class)
        .collect();
    if classes.iter().any(|&c| c != PANEL_CLASS) {
        return Err(Error::Generation(format!(
            "panel {}: topology is declared for class {PANEL_CLASS} only",
            spec.panel_id
        )));
    }
    let realized = realized_topology(&gt, &pred)?;
    if realized != spec.topology {
        return Err(Error::Generation(format!(
            "panel {} realizes {realized:?}, declared {:?}",
            spec.panel_id, spec.topology
        )));
    }
    Ok((gt, pred))
}

/// Writes every canonical panel as `DIR/gt/<id>.png` and `DIR/pred/<id>.png`,
/// plus a copy of the panel table. Returns the written label files.
pub fn export_panels(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for side in ["gt", "pred"] {
        let d = dir.join(side);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for spec in canonical_panels() {
        let (gt, pred) = generate_panel(&spec)?;
        for (side, map) in [("gt", &gt), ("pred", &pred)] {
            let path = dir.join(side).join(format!("{}.png", spec.panel_id));
            save_label_map(map, &path)?;
            written.push(path);
        }
    }
    let table = dir.join("panels.txt");
    std::fs::write(&table, PANEL_TABLE).map_err(|e| Error::io(&table, e))?;
    Ok(written)
}
