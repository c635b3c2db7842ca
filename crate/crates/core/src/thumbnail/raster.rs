use crate::dicom::{tags, ContourSet, DicomObject, Elements, Mask};

use super::{OverlayLayer, ThumbnailError};

/// Where a slice sits in patient space.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGeometry {
    pub origin: [f64; 3],
    /// Column (x) and row (y) spacing in mm.
    pub spacing: [f64; 2],
    pub rows: usize,
    pub columns: usize,
    pub orientation: [f64; 6],
    /// Distance within which a contour counts as lying on this slice.
    pub thickness: f64,
}

const IDENTITY: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

impl SliceGeometry {
    pub fn axial(origin: [f64; 3], spacing: f64, rows: usize, columns: usize) -> Self {
        SliceGeometry {
            origin,
            spacing: [spacing, spacing],
            rows,
            columns,
            orientation: IDENTITY,
            thickness: spacing,
        }
    }

    pub fn from_object(obj: &DicomObject) -> Option<Self> {
        let rows = obj.int(tags::ROWS)? as usize;
        let columns = obj.int(tags::COLUMNS)? as usize;
        let pos = obj.numbers(tags::IMAGE_POSITION_PATIENT).unwrap_or_default();
        let origin = if pos.len() == 3 { [pos[0], pos[1], pos[2]] } else { [0.0; 3] };
        let ps = obj.numbers(tags::PIXEL_SPACING).unwrap_or_default();
        let spacing = if ps.len() == 2 { [ps[1], ps[0]] } else { [1.0, 1.0] };
        let o = obj.numbers(tags::IMAGE_ORIENTATION_PATIENT).unwrap_or_default();
        let orientation = o.try_into().unwrap_or(IDENTITY);
        let thickness = obj.number(tags::SLICE_THICKNESS).filter(|t| *t > 0.0).unwrap_or(1.0);
        Some(SliceGeometry {
            origin,
            spacing,
            rows,
            columns,
            orientation,
            thickness,
        })
    }

    fn is_axial(&self) -> bool {
        self.orientation.iter().zip(IDENTITY).all(|(a, b)| (a - b).abs() < 1e-3)
    }
}

/// Rounds half up.
fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Pixels of a polygon with integer vertices: even-odd interior plus the outline.
///
/// Each pixel is sampled at its integer (col, row) coordinate; points on an
/// edge count as inside.
pub fn fill_polygon(vertices: &[(i64, i64)], rows: usize, columns: usize) -> Mask {
    let mut mask = Mask::empty(rows, columns);
    let n = vertices.len();
    if n == 0 {
        return mask;
    }
    let (rows_i, cols_i) = (rows as i64, columns as i64);
    let mut set = |x: i64, y: i64| {
        if (0..cols_i).contains(&x) && (0..rows_i).contains(&y) {
            mask.set(y as usize, x as usize, true);
        }
    };

    for y in 0..rows_i {
        // crossings of the scanline as exact fractions num/den, den > 0
        let mut xs: Vec<(i64, i64)> = Vec::new();
        for i in 0..n {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            if (y0 > y) != (y1 > y) {
                let mut num = x0 * (y1 - y0) + (y - y0) * (x1 - x0);
                let mut den = y1 - y0;
                if den < 0 {
                    num = -num;
                    den = -den;
                }
                xs.push((num, den));
            }
        }
        xs.sort_by(|a, b| (a.0 as i128 * b.1 as i128).cmp(&(b.0 as i128 * a.1 as i128)));
        for pair in xs.chunks_exact(2) {
            let start = pair[0].0.div_euclid(pair[0].1) + i64::from(pair[0].0.rem_euclid(pair[0].1) != 0);
            let end = pair[1].0.div_euclid(pair[1].1) + i64::from(pair[1].0.rem_euclid(pair[1].1) != 0);
            for x in start.max(0)..end.min(cols_i) {
                set(x, y);
            }
        }
    }

    for i in 0..n {
        let (x0, y0) = vertices[i];
        let (x1, y1) = vertices[(i + 1) % n];
        let (dx, dy) = (x1 - x0, y1 - y0);
        if dy == 0 {
            for x in x0.min(x1)..=x0.max(x1) {
                set(x, y0);
            }
            continue;
        }
        for y in y0.min(y1).max(0)..=y0.max(y1).min(rows_i - 1) {
            let num = x0 * dy + (y - y0) * dx;
            if num % dy == 0 {
                set(num / dy, y);
            }
        }
    }
    mask
}

/// Fills every ROI's contours that lie on the slice; one layer per ROI with any pixels.
pub fn rasterize_contours(contours: &ContourSet, geometry: &SliceGeometry) -> Result<Vec<OverlayLayer>, ThumbnailError> {
    if !geometry.is_axial() {
        return Err(ThumbnailError::UnsupportedOrientation);
    }
    let [sx, sy] = geometry.spacing;
    let mut layers = Vec::new();
    for roi in &contours.rois {
        let mut mask = Mask::empty(geometry.rows, geometry.columns);
        for c in &roi.contours {
            let on_slice = c
                .points
                .first()
                .is_some_and(|p| (p[2] - geometry.origin[2]).abs() <= geometry.thickness / 2.0);
            if !on_slice {
                continue;
            }
            let verts: Vec<(i64, i64)> = c
                .points
                .iter()
                .map(|p| {
                    (
                        round_half_up((p[0] - geometry.origin[0]) / sx),
                        round_half_up((p[1] - geometry.origin[1]) / sy),
                    )
                })
                .collect();
            let filled = fill_polygon(&verts, geometry.rows, geometry.columns);
            for (m, f) in mask.bits.iter_mut().zip(filled.bits) {
                *m |= f;
            }
        }
        if mask.area() > 0 {
            layers.push(OverlayLayer {
                number: roi.number.max(0) as u32,
                color: roi.color,
                mask,
            });
        }
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{Contour, Roi};

    fn brute(vertices: &[(i64, i64)], px: i64, py: i64) -> bool {
        let n = vertices.len();
        let mut inside = false;
        for i in 0..n {
            let (xi, yi) = vertices[i];
            let (xj, yj) = vertices[(i + 1) % n];
            let cross = (xj - xi) * (py - yi) - (yj - yi) * (px - xi);
            let within = px >= xi.min(xj) && px <= xi.max(xj) && py >= yi.min(yj) && py <= yi.max(yj);
            if cross == 0 && within {
                return true;
            }
            if (yi > py) != (yj > py) {
                // px < x-intercept, compared without division
                let lhs = (px - xi) * (yj - yi);
                let rhs = (xj - xi) * (py - yi);
                if (yj - yi > 0 && lhs < rhs) || (yj - yi < 0 && lhs > rhs) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn check(vertices: &[(i64, i64)], rows: usize, cols: usize) {
        let m = fill_polygon(vertices, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                assert_eq!(m.get(r, c), brute(vertices, c as i64, r as i64), "{vertices:?} at ({c},{r})");
            }
        }
    }

    #[test]
    fn square_fills_eleven_by_eleven() {
        let cs = ContourSet {
            rois: vec![Roi {
                number: 1,
                name: "sq".into(),
                color: None,
                contours: vec![Contour {
                    referenced_sop_uid: None,
                    geometric_type: "CLOSED_PLANAR".into(),
                    points: vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0], [0.0, 10.0, 0.0]],
                }],
            }],
            referenced_series: vec![],
        };
        let layers = rasterize_contours(&cs, &SliceGeometry::axial([0.0; 3], 1.0, 16, 16)).unwrap();
        let m = &layers[0].mask;
        assert_eq!(m.area(), 121);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(m.get(r, c), r <= 10 && c <= 10);
            }
        }
        let far = SliceGeometry::axial([0.0, 0.0, 5.0], 1.0, 16, 16);
        assert!(rasterize_contours(&cs, &far).unwrap().is_empty());
        let mut tilted = SliceGeometry::axial([0.0; 3], 1.0, 16, 16);
        tilted.orientation = [0.0, 1.0, 0.0, 0.0, 0.0, -1.0];
        assert_eq!(rasterize_contours(&cs, &tilted), Err(ThumbnailError::UnsupportedOrientation));
    }

    #[test]
    fn polygons_match_point_in_polygon() {
        check(&[(2, 1), (12, 4), (5, 13)], 16, 16);
        check(&[(0, 0), (15, 0), (8, 7), (15, 15), (0, 15), (7, 8)], 16, 16);
        check(&[(3, 3), (3, 3), (3, 3)], 8, 8);
        check(&[(-4, -2), (20, 5), (4, 30)], 16, 16);
        check(&[(1, 1), (9, 1), (9, 9), (5, 4), (1, 9)], 12, 12);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(-2.5), -2);
        assert_eq!(round_half_up(2.49), 2);
    }
}
