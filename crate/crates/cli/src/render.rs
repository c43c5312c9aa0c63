//! Binary PPM (P6) rendering of rasters. Row a = 0 is drawn at the bottom.

use panoptic_pillars::io::Raster;
use panoptic_pillars::synth::SplitMix64;
use panoptic_pillars::{ClassTable, Error, Grid, Result};

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [24, 24, 24];

const STUFF_COLORS: [Rgb; 6] = [
    [92, 92, 112],
    [112, 92, 108],
    [120, 112, 92],
    [96, 112, 80],
    [104, 100, 96],
    [72, 108, 72],
];

fn hashed(key: u64) -> [u8; 3] {
    let v = SplitMix64::new(key).next_u64();
    [v as u8, (v >> 8) as u8, (v >> 16) as u8]
}

/// Bright color for a thing instance (or a thing class, keyed as class*1000).
pub fn instance_color(label: u32) -> Rgb {
    hashed(label as u64).map(|c| 96 + c % 160)
}

/// Muted fixed color for a stuff class.
pub fn stuff_color(class_id: u16, classes: &ClassTable) -> Rgb {
    match classes.stuff_ids().iter().position(|&s| s == class_id) {
        Some(i) if i < STUFF_COLORS.len() => STUFF_COLORS[i],
        _ => hashed(0x5707 + class_id as u64).map(|c| 64 + c % 64),
    }
}

fn label_color(label: u32, classes: &ClassTable) -> Rgb {
    let class_id = (label / 1000) as u16;
    if label == 0 {
        BACKGROUND
    } else if classes.is_stuff(class_id) {
        stuff_color(class_id, classes)
    } else {
        instance_color(label)
    }
}

fn colors(raster: &Raster, classes: &ClassTable) -> Grid<Rgb> {
    match raster {
        Raster::Panoptic(g) => g.map(|l| label_color(l.0, classes)),
        Raster::Semantic(g) => g.map(|c| label_color(c as u32 * 1000, classes)),
        Raster::Affinity(g) => g.map(|v| if v == 0 { BACKGROUND } else { [240, 240, 240] }),
        Raster::Occupancy(g) => g.map(|v| {
            if v == 0 {
                BACKGROUND
            } else {
                let s = 60 + 15 * v.min(13);
                [s, s, s]
            }
        }),
    }
}

/// Encodes the raster as a P6 image with each cell drawn as a `scale`x`scale` block.
pub fn render_ppm(raster: &Raster, classes: &ClassTable, scale: usize) -> Result<Vec<u8>> {
    if scale == 0 {
        return Err(Error::InvalidInput("scale must be at least 1".into()));
    }
    let img = colors(raster, classes);
    let (h, w) = (img.h(), img.w());
    let header = format!("P6\n{} {}\n255\n", w * scale, h * scale);
    let mut out = Vec::with_capacity(header.len() + 3 * h * w * scale * scale);
    out.extend_from_slice(header.as_bytes());
    for a in (0..h).rev() {
        let mut line = Vec::with_capacity(3 * w * scale);
        for b in 0..w {
            for _ in 0..scale {
                line.extend_from_slice(&img.get(a, b));
            }
        }
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use panoptic_pillars::PanopticLabel;

    fn pixels(ppm: &[u8]) -> Vec<Rgb> {
        let end = ppm.iter().enumerate().filter(|(_, &c)| c == b'\n').nth(2).unwrap().0;
        ppm[end + 1..]
            .chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    #[test]
    fn empty_raster_is_background() {
        let r = Raster::Panoptic(Grid::filled(3, 4, PanopticLabel(0)));
        let img = render_ppm(&r, &ClassTable::nuscenes(), 2).unwrap();
        assert!(img.starts_with(b"P6\n8 6\n255\n"));
        assert!(pixels(&img).iter().all(|&p| p == BACKGROUND));
        assert_eq!(pixels(&img).len(), 48);
    }

    #[test]
    fn two_instances_two_colors() {
        let g = Grid::from_vec(1, 3, vec![PanopticLabel(4001), PanopticLabel(4002), PanopticLabel(11000)]).unwrap();
        let img = render_ppm(&Raster::Panoptic(g), &ClassTable::nuscenes(), 1).unwrap();
        let p = pixels(&img);
        assert_ne!(p[0], p[1]);
        assert_ne!(p[0], BACKGROUND);
        assert_eq!(p[2], STUFF_COLORS[0]);
    }

    #[test]
    fn bottom_row_is_row_zero() {
        let g = Grid::from_vec(2, 1, vec![1u8, 0]).unwrap();
        let img = render_ppm(&Raster::Affinity(g), &ClassTable::nuscenes(), 1).unwrap();
        assert_eq!(pixels(&img), vec![BACKGROUND, [240, 240, 240]]);
    }

    #[test]
    fn zero_scale_is_rejected() {
        let r = Raster::Affinity(Grid::filled(1, 1, 0u8));
        assert!(render_ppm(&r, &ClassTable::nuscenes(), 0).is_err());
    }
}
