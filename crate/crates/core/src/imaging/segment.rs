//! Coin/background separation: Otsu threshold, morphological closing, hole
//! filling and largest connected component.

use std::collections::VecDeque;

use crate::image::{GrayImage, Mask};

use super::SegmentationFailure;

const CLOSE_RADIUS: isize = 3;

/// Foreground (coin) mask of `img` at native resolution.
pub fn foreground_mask(img: &GrayImage) -> Result<Mask, SegmentationFailure> {
    let threshold = otsu_threshold(img).ok_or(SegmentationFailure::Uniform)?;
    let (w, h) = (img.width(), img.height());

    // The coin is the class that does not dominate the image border.
    let mut border_bright = 0usize;
    let mut border_total = 0usize;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                border_total += 1;
                if luma_bin(img.get(x, y)) > threshold {
                    border_bright += 1;
                }
            }
        }
    }
    let coin_is_bright = border_bright * 2 <= border_total;
    let bits = img
        .pixels()
        .iter()
        .map(|&v| (luma_bin(v) > threshold) == coin_is_bright)
        .collect();
    let raw = Mask::from_vec(w, h, bits);

    let closed = erode(&dilate(&raw, CLOSE_RADIUS), CLOSE_RADIUS);
    let filled = fill_holes(&closed);
    let largest = largest_component(&filled);
    if largest.is_empty() {
        return Err(SegmentationFailure::NoForeground);
    }
    Ok(largest)
}

#[inline]
fn luma_bin(v: f32) -> usize {
    ((v * 256.0) as usize).min(255)
}

/// Otsu threshold over a 256-bin histogram: bins `<= t` form the dark class.
/// `None` when the image has a single populated bin.
pub(crate) fn otsu_threshold(img: &GrayImage) -> Option<usize> {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[luma_bin(v)] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut weight_bg = 0.0;
    let mut sum_bg = 0.0;
    let mut best = (0usize, -1.0f64);
    for (t, &count) in hist.iter().enumerate() {
        weight_bg += count as f64;
        if weight_bg == 0.0 {
            continue;
        }
        let weight_fg = total - weight_bg;
        if weight_fg == 0.0 {
            break;
        }
        sum_bg += t as f64 * count as f64;
        let mean_bg = sum_bg / weight_bg;
        let mean_fg = (sum_all - sum_bg) / weight_fg;
        let between = weight_bg * weight_fg * (mean_bg - mean_fg).powi(2);
        if between > best.1 {
            best = (t, between);
        }
    }
    if best.1 <= 0.0 {
        return None;
    }
    Some(best.0)
}

fn disk_offsets(radius: isize) -> Vec<(isize, isize)> {
    let mut offsets = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

fn dilate(mask: &Mask, radius: isize) -> Mask {
    morph(mask, radius, true)
}

fn erode(mask: &Mask, radius: isize) -> Mask {
    morph(mask, radius, false)
}

/// Dilation when `grow`, erosion otherwise. Outside the frame counts as
/// background for dilation and foreground for erosion, so closing never eats
/// into the border.
fn morph(mask: &Mask, radius: isize, grow: bool) -> Mask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offsets = disk_offsets(radius);
    let mut out = Mask::new(mask.width(), mask.height(), false);
    for y in 0..h {
        for x in 0..w {
            let hit = |&(dx, dy): &(isize, isize)| {
                let (sx, sy) = (x + dx, y + dy);
                if sx < 0 || sy < 0 || sx >= w || sy >= h {
                    !grow
                } else {
                    mask.get(sx as usize, sy as usize)
                }
            };
            let v = if grow {
                offsets.iter().any(hit)
            } else {
                offsets.iter().all(hit)
            };
            out.set(x as usize, y as usize, v);
        }
    }
    out
}

/// Marks as foreground every background region not connected to the border.
fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) && !mask.get(x, y) {
                outside[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for (nx, ny) in neighbors4(x, y, w, h) {
            let i = ny * w + nx;
            if !outside[i] && !mask.get(nx, ny) {
                outside[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    Mask::from_vec(w, h, outside.into_iter().map(|o| !o).collect())
}

fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut n = Vec::with_capacity(4);
    if x > 0 {
        n.push((x - 1, y));
    }
    if y > 0 {
        n.push((x, y - 1));
    }
    if x + 1 < w {
        n.push((x + 1, y));
    }
    if y + 1 < h {
        n.push((x, y + 1));
    }
    n.into_iter()
}

/// Largest 8-connected component; ties go to the first in scan order.
fn largest_component(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || label[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32;
        sizes.push(0);
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            sizes[id as usize] += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits()[j] && label[j] == 0 {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
    }
    let best = sizes
        .iter()
        .enumerate()
        .skip(1)
        .fold((0usize, 0usize), |acc, (id, &s)| if s > acc.1 { (id, s) } else { acc })
        .0 as u32;
    Mask::from_vec(
        w,
        h,
        label.into_iter().map(|l| best != 0 && l == best).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn otsu_splits_bimodal_histogram() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0.1 } else { 0.9 });
        let t = otsu_threshold(&img).unwrap();
        assert!(t >= luma_bin(0.1) && t < luma_bin(0.9));
    }

    #[test]
    fn closing_bridges_small_gaps_and_holes_are_filled() {
        // Ring with a 2px gap: closing joins it, hole filling makes it solid.
        let mut m = Mask::new(41, 41, false);
        for y in 0..41 {
            for x in 0..41 {
                let d = (x as f64 - 20.0).hypot(y as f64 - 20.0);
                if (12.0..15.0).contains(&d) && !((19..=20).contains(&x) && y < 20) {
                    m.set(x, y, true);
                }
            }
        }
        let closed = erode(&dilate(&m, CLOSE_RADIUS), CLOSE_RADIUS);
        let filled = fill_holes(&closed);
        assert!(filled.get(20, 20));
    }

    #[test]
    fn keeps_largest_component_only() {
        let mut m = Mask::new(20, 10, false);
        m.set(1, 1, true);
        for x in 10..15 {
            m.set(x, 5, true);
        }
        let l = largest_component(&m);
        assert_eq!(l.count(), 5);
        assert!(!l.get(1, 1));
    }

    #[test]
    fn dark_coin_on_light_background() {
        let img = GrayImage::from_fn(100, 100, |x, y| {
            let d = ((x as f32 - 50.0).powi(2) + (y as f32 - 50.0).powi(2)).sqrt();
            if d < 30.0 {
                0.2
            } else {
                0.95
            }
        });
        let m = foreground_mask(&img).unwrap();
        let (x0, _, x1, _) = m.bounding_box().unwrap();
        assert!((x1 - x0 + 1).abs_diff(59) <= 2);
    }
}
