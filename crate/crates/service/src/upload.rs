//! Zip ingestion: every entry must be an image, within count and size limits.

use std::io::{Cursor, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_TOTAL_BYTES: u64 = 500_000_000;
pub const MAX_FILES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadLimits {
    /// Sum of uncompressed entry sizes.
    pub max_total_bytes: u64,
    pub max_files: usize,
}

impl Default for UploadLimits {
    fn default() -> Self {
        Self {
            max_total_bytes: MAX_TOTAL_BYTES,
            max_files: MAX_FILES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadEntry {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum UploadError {
    #[error("archive holds more than {limit} bytes of data")]
    ArchiveTooLarge { limit: u64 },
    #[error("archive holds {count} files, at most {limit} are allowed")]
    TooManyFiles { count: usize, limit: usize },
    #[error("{0:?} is not an image")]
    NonImageEntry(String),
    #[error("archive cannot be read: {0}")]
    CorruptArchive(String),
}

impl UploadError {
    /// Machine-readable rule id.
    pub fn code(&self) -> &'static str {
        match self {
            UploadError::ArchiveTooLarge { .. } => "ARCHIVE_TOO_LARGE",
            UploadError::TooManyFiles { .. } => "TOO_MANY_FILES",
            UploadError::NonImageEntry(_) => "NON_IMAGE_ENTRY",
            UploadError::CorruptArchive(_) => "CORRUPT_ARCHIVE",
        }
    }

    /// The upload rule that was broken, phrased for the user.
    pub fn rule(&self, limits: &UploadLimits) -> String {
        match self {
            UploadError::ArchiveTooLarge { .. } => format!(
                "uncompressed archive content must not exceed {} bytes",
                limits.max_total_bytes
            ),
            UploadError::TooManyFiles { .. } => {
                format!("an archive may hold at most {} files", limits.max_files)
            }
            UploadError::NonImageEntry(_) => "the archive must contain images only".into(),
            UploadError::CorruptArchive(_) => "the upload must be a readable .zip archive".into(),
        }
    }
}

/// Directories and macOS resource forks are not files of the upload.
fn is_ignored(path: &str, is_dir: bool) -> bool {
    is_dir || path.starts_with("__MACOSX/") || path.contains("/__MACOSX/")
}

fn base_name(path: &str) -> &str {
    path.rsplit(['/', '\\']).next().unwrap_or(path)
}

fn is_image(bytes: &[u8]) -> bool {
    image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .ok()
        .filter(|r| r.format().is_some())
        .is_some_and(|r| r.into_dimensions().is_ok())
}

/// Checks an uploaded archive and returns its images under their base names,
/// in archive order. The whole upload is rejected on the first broken rule:
/// unreadable archive, then file count, then declared size, then content.
pub fn validate_upload(archive: &[u8], limits: &UploadLimits) -> Result<Vec<UploadEntry>, UploadError> {
    let corrupt = |e: zip::result::ZipError| UploadError::CorruptArchive(e.to_string());
    let mut zip = zip::ZipArchive::new(Cursor::new(archive)).map_err(corrupt)?;

    let mut files = Vec::new();
    let mut declared: u64 = 0;
    for i in 0..zip.len() {
        let entry = zip.by_index_raw(i).map_err(corrupt)?;
        if is_ignored(entry.name(), entry.is_dir()) {
            continue;
        }
        declared = declared.saturating_add(entry.size());
        files.push(i);
    }
    if files.len() > limits.max_files {
        return Err(UploadError::TooManyFiles {
            count: files.len(),
            limit: limits.max_files,
        });
    }
    let too_large = UploadError::ArchiveTooLarge {
        limit: limits.max_total_bytes,
    };
    if declared > limits.max_total_bytes {
        return Err(too_large);
    }

    let mut entries = Vec::with_capacity(files.len());
    let mut budget = limits.max_total_bytes;
    for i in files {
        let entry = zip.by_index(i).map_err(corrupt)?;
        let name = base_name(entry.name()).to_owned();
        // Declared sizes can lie; never read past the budget.
        let mut bytes = Vec::new();
        entry
            .take(budget + 1)
            .read_to_end(&mut bytes)
            .map_err(|e| UploadError::CorruptArchive(e.to_string()))?;
        if bytes.len() as u64 > budget {
            return Err(too_large);
        }
        budget -= bytes.len() as u64;
        if !is_image(&bytes) {
            return Err(UploadError::NonImageEntry(name));
        }
        entries.push(UploadEntry { name, bytes });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn png() -> Vec<u8> {
        let img = image::GrayImage::from_pixel(4, 4, image::Luma([128u8]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).unwrap();
        out.into_inner()
    }

    fn zip_of(entries: &[(&str, Vec<u8>)]) -> Vec<u8> {
        let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let opts = zip::write::SimpleFileOptions::default();
        for (name, bytes) in entries {
            if name.ends_with('/') {
                w.add_directory(*name, opts).unwrap();
            } else {
                w.start_file(*name, opts).unwrap();
                w.write_all(bytes).unwrap();
            }
        }
        w.finish().unwrap().into_inner()
    }

    #[test]
    fn nested_paths_become_base_names() {
        let z = zip_of(&[
            ("R_1205/", vec![]),
            ("R_1205/a.png", png()),
            ("__MACOSX/R_1205/._a.png", b"junk".to_vec()),
            ("b.png", png()),
        ]);
        let entries = validate_upload(&z, &UploadLimits::default()).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a.png", "b.png"]);
    }

    #[test]
    fn text_file_is_rejected_by_name() {
        let z = zip_of(&[("a.png", png()), ("notes.txt", b"hello".to_vec())]);
        assert_eq!(
            validate_upload(&z, &UploadLimits::default()),
            Err(UploadError::NonImageEntry("notes.txt".into()))
        );
    }

    #[test]
    fn limits_are_inclusive() {
        let z = zip_of(&[("a.png", png()), ("b.png", png())]);
        let size = 2 * png().len() as u64;
        let exact = UploadLimits {
            max_total_bytes: size,
            max_files: 2,
        };
        assert_eq!(validate_upload(&z, &exact).unwrap().len(), 2);
        let small = UploadLimits {
            max_total_bytes: size - 1,
            ..exact
        };
        assert!(matches!(validate_upload(&z, &small), Err(UploadError::ArchiveTooLarge { .. })));
        let few = UploadLimits { max_files: 1, ..exact };
        assert_eq!(
            validate_upload(&z, &few),
            Err(UploadError::TooManyFiles { count: 2, limit: 1 })
        );
    }

    #[test]
    fn garbage_is_corrupt() {
        let err = validate_upload(b"not a zip", &UploadLimits::default()).unwrap_err();
        assert_eq!(err.code(), "CORRUPT_ARCHIVE");
    }
}
