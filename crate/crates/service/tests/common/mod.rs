#![allow(dead_code)]

use std::io::{Cursor, Write};

use dielink_core::synth::{die_link_fixture, encode_png, Jitter};
use dielink_service::UploadEntry;

pub fn zip_of(entries: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default();
    for (name, bytes) in entries {
        w.start_file(name.as_str(), opts).unwrap();
        w.write_all(bytes).unwrap();
    }
    w.finish().unwrap().into_inner()
}

pub fn tiny_png() -> Vec<u8> {
    let img = image::GrayImage::from_pixel(4, 4, image::Luma([90u8]));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

/// `n` synthetic coin PNGs, struck from dies of three coins each.
pub fn coin_pngs(n: usize) -> Vec<(String, Vec<u8>)> {
    die_link_fixture(n.div_ceil(3), 3, 0.05, Jitter::default(), 1205)
        .into_iter()
        .take(n)
        .map(|c| (c.name, encode_png(&c.image)))
        .collect()
}

pub fn entries(files: &[(String, Vec<u8>)]) -> Vec<UploadEntry> {
    files
        .iter()
        .map(|(name, bytes)| UploadEntry {
            name: name.clone(),
            bytes: bytes.clone(),
        })
        .collect()
}
