//! PNG scatter plots with a built-in 5x7 bitmap font, so runs produce a
//! legend-labelled embedding picture with no plotting stack behind it.

use ndarray::Array2;
use std::io::Write;
use std::path::Path;

/// Rows of 5-bit masks, top to bottom, MSB on the left.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F],
        '3' => [0x1E, 0x01, 0x01, 0x0E, 0x01, 0x01, 0x1E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11],
        'Y' => [0x11, 0x0A, 0x04, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        _ => [0x00; 7],
    }
}

fn draw_text(img: &mut image::RgbImage, x0: u32, y0: u32, text: &str, color: [u8; 3]) {
    let mut x = x0;
    for c in text.chars() {
        let rows = glyph(c);
        for (dy, bits) in rows.iter().enumerate() {
            for dx in 0..5u32 {
                if bits & (1 << (4 - dx)) != 0 {
                    let (px, py) = (x + dx, y0 + dy as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, image::Rgb(color));
                    }
                }
            }
        }
        x += 6;
    }
}

/// Evenly spaced hues; saturation/value alternate a little so neighbors
/// split apart even in large palettes.
pub fn palette(n: usize) -> Vec<[u8; 3]> {
    (0..n)
        .map(|i| {
            let h = 360.0 * i as f64 / n.max(1) as f64;
            let v = if i % 2 == 0 { 0.95 } else { 0.70 };
            hsv_to_rgb(h, 0.85, v)
        })
        .collect()
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

const PLOT_SIZE: u32 = 560;
const MARGIN: u32 = 20;
const LEGEND_W: u32 = 150;

/// Scatter `coords` (n, 2) colored by label, legend down the right edge.
pub fn scatter_png(
    path: &Path,
    coords: &Array2<f64>,
    labels: &[usize],
    names: &[String],
) -> Result<(), std::io::Error> {
    assert_eq!(coords.nrows(), labels.len());
    let colors = palette(names.len());
    let width = MARGIN * 2 + PLOT_SIZE + LEGEND_W;
    let height = (MARGIN * 2 + PLOT_SIZE).max(MARGIN * 2 + names.len() as u32 * 12);
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));

    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..coords.nrows() {
        xmin = xmin.min(coords[[i, 0]]);
        xmax = xmax.max(coords[[i, 0]]);
        ymin = ymin.min(coords[[i, 1]]);
        ymax = ymax.max(coords[[i, 1]]);
    }
    let xspan = (xmax - xmin).max(1e-9);
    let yspan = (ymax - ymin).max(1e-9);

    for i in 0..coords.nrows() {
        let px = MARGIN as f64 + (coords[[i, 0]] - xmin) / xspan * (PLOT_SIZE - 1) as f64;
        let py = MARGIN as f64 + (1.0 - (coords[[i, 1]] - ymin) / yspan) * (PLOT_SIZE - 1) as f64;
        let color = colors
            .get(labels[i])
            .copied()
            .unwrap_or([0, 0, 0]);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (qx, qy) = (px as i64 + dx, py as i64 + dy);
                if qx >= 0 && qy >= 0 && (qx as u32) < width && (qy as u32) < height {
                    img.put_pixel(qx as u32, qy as u32, image::Rgb(color));
                }
            }
        }
    }

    let legend_x = MARGIN + PLOT_SIZE + 15;
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + i as u32 * 12;
        for dy in 0..8 {
            for dx in 0..8 {
                img.put_pixel(legend_x + dx, y + dy, image::Rgb(colors[i]));
            }
        }
        draw_text(&mut img, legend_x + 12, y, name, [30, 30, 30]);
    }

    img.save(path).map_err(std::io::Error::other)
}

/// Companion CSV so the picture can be re-plotted elsewhere.
pub fn save_coords_csv(
    path: &Path,
    coords: &Array2<f64>,
    labels: &[usize],
    names: &[String],
) -> Result<(), std::io::Error> {
    assert_eq!(coords.nrows(), labels.len());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,label,name")?;
    for i in 0..coords.nrows() {
        writeln!(
            f,
            "{:.6},{:.6},{},{}",
            coords[[i, 0]],
            coords[[i, 1]],
            labels[i],
            names.get(labels[i]).map(String::as_str).unwrap_or("?")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_writes_a_readable_png() {
        let dir = std::env::temp_dir().join("vtrec-plot-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scatter.png");
        let coords = ndarray::arr2(&[[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5], [0.3, -0.7]]);
        let labels = vec![0usize, 1, 0, 1];
        let names = vec!["mix".to_string(), "pull in".to_string()];
        scatter_png(&path, &coords, &labels, &names).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        assert!(img.width() > 600 && img.height() > 500);
        // Legend swatch of category 0 sits at a known spot.
        let colors = palette(2);
        let px = img.get_pixel(MARGIN + PLOT_SIZE + 15 + 3, MARGIN + 3);
        assert_eq!(px.0, colors[0]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn coords_csv_has_one_line_per_point() {
        let dir = std::env::temp_dir().join("vtrec-plot-csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("coords.csv");
        let coords = ndarray::arr2(&[[0.0, 0.0], [1.0, 1.0]]);
        save_coords_csv(&path, &coords, &[1, 0], &["a".into(), "b".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(",1,b"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn palette_colors_are_distinct() {
        let p = palette(30);
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                assert_ne!(p[i], p[j], "palette collision at {i},{j}");
            }
        }
    }

    #[test]
    fn glyphs_cover_the_category_alphabet() {
        // Every character that can appear in a category name must render
        // something visible (space excepted).
        for name in crate::fx::Registry::full(true).names() {
            for c in name.chars() {
                if c == ' ' {
                    continue;
                }
                assert!(
                    glyph(c).iter().any(|r| *r != 0),
                    "no glyph for {c:?} in {name}"
                );
            }
        }
    }
}
