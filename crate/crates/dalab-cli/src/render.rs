//! P6 rasters of box sets and unstable curves.

use dalab::boxdyn::BoxSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("unrecognized input: {0}")]
    Format(String),
}

const FILLED: [u8; 3] = [24, 48, 120];
const EMPTY: [u8; 3] = [255, 255, 255];
const FRAME: [u8; 3] = [0, 0, 0];
const GAP: [u8; 3] = [200, 200, 200];
const CURVE: [u8; 3] = [160, 20, 20];
/// Largest tile side; finer grids are merged by any-occupancy.
const MAX_TILE: usize = 64;
const CURVE_SIDE: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Image { width, height, rgb: fill.repeat(width * height) }
    }

    fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let k = 3 * (y * self.width + x);
        self.rgb[k..k + 3].copy_from_slice(&c);
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let k = 3 * (y * self.width + x);
        [self.rgb[k], self.rgb[k + 1], self.rgb[k + 2]]
    }

    fn frame(&mut self, x0: usize, y0: usize, w: usize, h: usize) {
        for x in x0..x0 + w {
            self.set(x, y0, FRAME);
            self.set(x, y0 + h - 1, FRAME);
        }
        for y in y0..y0 + h {
            self.set(x0, y, FRAME);
            self.set(x0 + w - 1, y, FRAME);
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Three mosaics side by side, one per slicing axis. Each tile is a slice
/// perpendicular to that axis; pixel (u, v) spans the two remaining axes in
/// cyclic order.
pub fn render_box_set(set: &BoxSet) -> Image {
    let grid = set.grid();
    let n = grid.n() as usize;
    let f = n.div_ceil(MAX_TILE);
    let m = n.div_ceil(f);
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let mosaic_w = cols * (m + 1) + 1;
    let mosaic_h = rows * (m + 1) + 1;
    let width = 3 * (mosaic_w + 2) + 2 * 4;
    let height = mosaic_h + 2;
    let mut img = Image::new(width, height, GAP);

    // occupancy[axis][slice][u][v] at reduced resolution
    let mut occ = vec![vec![false; m * m * m]; 3];
    for b in set.iter() {
        let c = grid.coords(b).map(|t| t as usize / f);
        for (axis, o) in occ.iter_mut().enumerate() {
            let (s, u, v) = (c[axis], c[(axis + 1) % 3], c[(axis + 2) % 3]);
            o[(s * m + v) * m + u] = true;
        }
    }
    for (axis, o) in occ.iter().enumerate() {
        let ox = axis * (mosaic_w + 2 + 4);
        img.frame(ox, 0, mosaic_w + 2, mosaic_h + 2);
        for s in 0..m {
            let (tx, ty) = (s % cols, s / cols);
            let x0 = ox + 1 + 1 + tx * (m + 1);
            let y0 = 1 + 1 + ty * (m + 1);
            for v in 0..m {
                for u in 0..m {
                    let c = if o[(s * m + v) * m + u] { FILLED } else { EMPTY };
                    // v grows upward
                    img.set(x0 + u, y0 + (m - 1 - v), c);
                }
            }
        }
    }
    img
}

fn line(img: &mut Image, x0: usize, y0: usize, a: (f64, f64), b: (f64, f64), side: usize) {
    let px = |t: f64| ((t * side as f64).floor() as i64).clamp(0, side as i64 - 1);
    let (mut x, mut y) = (px(a.0), px(a.1));
    let (x1, y1) = (px(b.0), px(b.1));
    let (dx, dy) = ((x1 - x).abs(), -(y1 - y).abs());
    let (sx, sy) = ((x1 - x).signum(), (y1 - y).signum());
    let mut err = dx + dy;
    loop {
        img.set(x0 + x as usize, y0 + (side - 1 - y as usize), CURVE);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Projections of the polyline to the (x, y) and (x, z) faces; chords that
/// wrap around the torus are split at the face boundary.
pub fn render_curve(points: &[[f64; 3]]) -> Image {
    let side = CURVE_SIDE;
    let width = 2 * (side + 2) + 4;
    let mut img = Image::new(width, side + 2, EMPTY);
    for (panel, (i, j)) in [(0usize, 1usize), (0, 2)].into_iter().enumerate() {
        let ox = panel * (side + 2 + 4);
        img.frame(ox, 0, side + 2, side + 2);
        for w in points.windows(2) {
            let (a, b) = ((w[0][i], w[0][j]), (w[1][i], w[1][j]));
            if (b.0 - a.0).abs() > 0.5 || (b.1 - a.1).abs() > 0.5 {
                // unwrapped chord, drawn from each end toward the boundary
                let d = ((b.0 - a.0) - (b.0 - a.0).round(), (b.1 - a.1) - (b.1 - a.1).round());
                line(&mut img, ox + 1, 1, a, (a.0 + d.0, a.1 + d.1), side);
                line(&mut img, ox + 1, 1, (b.0 - d.0, b.1 - d.1), b, side);
            } else {
                line(&mut img, ox + 1, 1, a, b, side);
            }
        }
    }
    img
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<[f64; 3]>, RenderError> {
    let mut lines = text.lines();
    if lines.next() != Some("s,x,y,z") {
        return Err(RenderError::Format("expected a DAQBOX1 box set or an s,x,y,z curve".into()));
    }
    lines
        .enumerate()
        .map(|(k, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| RenderError::Format(format!("curve row {}: {l:?}", k + 2)))?;
            if v.len() != 4 {
                return Err(RenderError::Format(format!("curve row {} has {} fields", k + 2, v.len())));
            }
            Ok([v[1], v[2], v[3]])
        })
        .collect()
}

/// Renders a DAQBOX1 box set or an unstable-curve CSV, chosen by magic.
pub fn render_bytes(data: &[u8]) -> Result<Image, RenderError> {
    if data.starts_with(b"DAQBOX1") {
        let set = BoxSet::from_bytes(data).map_err(|e| RenderError::Format(e.to_string()))?;
        return Ok(render_box_set(&set));
    }
    let text =
        std::str::from_utf8(data).map_err(|_| RenderError::Format("binary input without DAQBOX1 magic".into()))?;
    Ok(render_curve(&parse_curve_csv(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dalab::boxdyn::BoxGrid;

    fn count(img: &Image, c: [u8; 3]) -> usize {
        img.rgb.chunks(3).filter(|p| *p == c).count()
    }

    #[test]
    fn full_and_empty_mosaics() {
        let grid = BoxGrid::new(8).unwrap();
        let full = render_box_set(&BoxSet::full(grid));
        let empty = render_box_set(&BoxSet::empty(grid));
        assert_eq!(count(&full, FILLED), 3 * 8 * 8 * 8);
        assert_eq!(count(&full, EMPTY), 0);
        assert_eq!(count(&empty, FILLED), 0);
        assert_eq!(count(&empty, EMPTY), 3 * 8 * 8 * 8);
        assert_eq!(count(&empty, FRAME), count(&full, FRAME));
        assert!(count(&empty, FRAME) > 0);
    }

    #[test]
    fn single_box_shows_once_per_axis() {
        let grid = BoxGrid::new(8).unwrap();
        let set = BoxSet::from_indices(grid, [grid.index(1, 2, 3)]);
        assert_eq!(count(&render_box_set(&set), FILLED), 3);
    }

    #[test]
    fn large_grids_are_merged() {
        let grid = BoxGrid::new(256).unwrap();
        let img = render_box_set(&BoxSet::full(grid));
        assert_eq!(count(&img, FILLED), 3 * 64 * 64 * 64);
        assert!(img.width < 2000);
    }

    #[test]
    fn magic_dispatch() {
        let grid = BoxGrid::new(4).unwrap();
        let bytes = BoxSet::full(grid).to_bytes();
        assert_eq!(render_bytes(&bytes).unwrap(), render_box_set(&BoxSet::full(grid)));
        assert!(matches!(render_bytes(b"P6\n1 1\n255\n\0\0\0"), Err(RenderError::Format(_))));
        assert!(matches!(render_bytes(&[0xff, 0xfe, 0x00]), Err(RenderError::Format(_))));
        let curve = render_bytes(b"s,x,y,z\n0,0.1,0.1,0.1\n1,0.9,0.2,0.3\n").unwrap();
        assert!(count(&curve, CURVE) > 0);
    }

    #[test]
    fn wrapping_chord_does_not_cross_the_panel() {
        let img = render_curve(&[[0.98, 0.5, 0.5], [0.02, 0.5, 0.5]]);
        let drawn = count(&img, CURVE);
        // two short pieces per panel instead of a full-width line
        assert!(drawn < 2 * 40, "{drawn}");
    }

    #[test]
    fn ppm_header() {
        let img = Image::new(2, 1, EMPTY);
        assert_eq!(img.to_ppm(), b"P6\n2 1\n255\n\xff\xff\xff\xff\xff\xff".to_vec());
    }
}
