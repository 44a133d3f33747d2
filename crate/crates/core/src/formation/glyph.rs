// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Fixed 5x7 dot-matrix glyphs for digits and uppercase letters.

use super::{Plane, Point3, PointCloud};
use crate::{Error, Result};

pub const GLYPH_COLUMNS: usize = 5;
pub const GLYPH_ROWS: usize = 7;

type Glyph = [&'static str; GLYPH_ROWS];

// Rows run top to bottom; `#` is a lit cell.
#[rustfmt::skip]
const GLYPHS: [(char, Glyph); 36] = [
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('A', ["..#..", ".#.#.", "#...#", "#...#", "#####", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".####", "#....", "#....", "#..##", "#...#", "#...#", ".###."]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
];

/// The glyph for `c` as a row-major bitmap (row 0 is the top row).
pub fn glyph_bitmap(c: char) -> Result<[[bool; GLYPH_COLUMNS]; GLYPH_ROWS]> {
    let (_, rows) = GLYPHS
        .iter()
        .find(|(g, _)| *g == c)
        .ok_or(Error::UnsupportedGlyph(c))?;
    let mut bitmap = [[false; GLYPH_COLUMNS]; GLYPH_ROWS];
    for (r, row) in rows.iter().enumerate() {
        for (col, cell) in row.bytes().enumerate() {
            bitmap[r][col] = cell == b'#';
        }
    }
    Ok(bitmap)
}

/// Number of lit cells in the glyph for `c`.
pub fn lit_cells(c: char) -> Result<usize> {
    Ok(glyph_bitmap(c)?.iter().flatten().filter(|&&lit| lit).count())
}

/// One point per lit cell, characters laid out left to right with a blank
/// column between them. `anchor` is the bottom-left cell of the first
/// character; the point order is character, then row from the top, then
/// column.
pub fn rasterize_text(text: &str, cell_size: f64, anchor: Point3, plane: Plane) -> Result<PointCloud> {
    if text.is_empty() {
        return Err(Error::InvalidInput("text is empty".into()));
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("cell size {cell_size} must be positive")));
    }
    let glyphs = text.chars().map(glyph_bitmap).collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for (i, bitmap) in glyphs.iter().enumerate() {
        let column0 = i * (GLYPH_COLUMNS + 1);
        for (r, row) in bitmap.iter().enumerate() {
            for (c, &lit) in row.iter().enumerate() {
                if lit {
                    let h = (column0 + c) as f64 * cell_size;
                    let v = (GLYPH_ROWS - 1 - r) as f64 * cell_size;
                    points.push(plane.embed(&anchor, h, v));
                }
            }
        }
    }
    Ok(PointCloud::new(points, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_well_formed() {
        for (c, rows) in GLYPHS {
            assert!(rows.iter().all(|r| r.len() == GLYPH_COLUMNS && r.bytes().all(|b| b == b'#' || b == b'.')), "{c}");
            assert!(lit_cells(c).unwrap() > 0);
        }
        let mut chars: Vec<char> = GLYPHS.iter().map(|(c, _)| *c).collect();
        chars.dedup();
        assert_eq!(chars.len(), 36);
    }

    #[test]
    fn one_point_per_lit_cell() {
        // Independent count straight from the table strings.
        let ones = GLYPHS[1].1.iter().map(|r| r.matches('#').count()).sum::<usize>();
        let cloud = rasterize_text("1", 1.0, Point3::origin(), Plane::Xz).unwrap();
        assert_eq!(cloud.len(), ones);
        assert_eq!(ones, 10);
    }

    #[test]
    fn show_glyphs_fit_sixteen_drones() {
        for c in "123TSAG".chars() {
            assert!(lit_cells(c).unwrap() <= 16, "{c}");
        }
    }

    #[test]
    fn rejects_empty_and_unsupported() {
        assert!(matches!(rasterize_text("", 1.0, Point3::origin(), Plane::Xy), Err(Error::InvalidInput(_))));
        assert!(matches!(
            rasterize_text("A?", 1.0, Point3::origin(), Plane::Xy),
            Err(Error::UnsupportedGlyph('?'))
        ));
        assert!(matches!(rasterize_text("a", 1.0, Point3::origin(), Plane::Xy), Err(Error::UnsupportedGlyph('a'))));
    }

    #[test]
    fn xy_plane_keeps_anchor_height() {
        let cloud = rasterize_text("T", 2.0, Point3::new(0.0, 0.0, 10.0), Plane::Xy).unwrap();
        assert!(cloud.points.iter().all(|p| p.z == 10.0));
        // The crossbar is the top row.
        assert!(cloud.points.iter().filter(|p| p.y == 12.0).count() == 5);
    }

    #[test]
    fn characters_are_separated_by_a_blank_column() {
        let cloud = rasterize_text("11", 1.0, Point3::origin(), Plane::Xz).unwrap();
        let first_max = cloud.points[..10].iter().map(|p| p.x).fold(f64::MIN, f64::max);
        let second_min = cloud.points[10..].iter().map(|p| p.x).fold(f64::MAX, f64::min);
        assert_eq!(first_max, 3.0);
        assert_eq!(second_min, 7.0);
        assert!(cloud.points.iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn cell_size_sets_min_spacing() {
        let cloud = rasterize_text("TSAG", 1.5, Point3::origin(), Plane::Xz).unwrap();
        assert_eq!(cloud.min_pairwise_distance(), 1.5);
    }
}
