//! Content-addressed image storage.
//!
//! Every blob lives at `{root}/{sha256-hex}`; the name is the digest of the
//! bytes, so identical uploads collapse onto one [`ImageRef`] and a read can
//! always be checked against its name.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// SHA-256 digest of an image file's bytes, lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageRef(String);

impl ImageRef {
    pub fn for_bytes(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ImageRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(Self(s.to_string()))
        } else {
            Err(format!("{s:?} is not a sha256 hex digest"))
        }
    }
}

impl TryFrom<String> for ImageRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ImageRef> for String {
    fn from(r: ImageRef) -> String {
        r.0
    }
}

#[derive(Debug, Clone)]
pub struct ImageStore {
    root: PathBuf,
}

impl ImageStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, image: &ImageRef) -> PathBuf {
        self.root.join(image.as_str())
    }

    pub fn put(&self, bytes: &[u8]) -> io::Result<ImageRef> {
        let image = ImageRef::for_bytes(bytes);
        let path = self.path_of(&image);
        if !path.exists() {
            let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
            tmp.write_all(bytes)?;
            tmp.persist(&path).map_err(|e| e.error)?;
        }
        Ok(image)
    }

    pub fn get(&self, image: &ImageRef) -> io::Result<Vec<u8>> {
        let bytes = fs::read(self.path_of(image))?;
        if ImageRef::for_bytes(&bytes) != *image {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("stored blob {image} fails its digest check"),
            ));
        }
        Ok(bytes)
    }

    pub fn contains(&self, image: &ImageRef) -> bool {
        self.path_of(image).is_file()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_bytes_share_a_ref() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path()).unwrap();
        let a = store.put(b"pixels").unwrap();
        let b = store.put(b"pixels").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, store.put(b"other").unwrap());
        assert_eq!(store.get(&a).unwrap(), b"pixels");
    }

    #[test]
    fn corrupted_blob_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path()).unwrap();
        let a = store.put(b"pixels").unwrap();
        fs::write(store.path_of(&a), b"tampered").unwrap();
        assert!(store.get(&a).is_err());
    }

    #[test]
    fn refs_must_be_hex_digests() {
        assert!("../etc/passwd".parse::<ImageRef>().is_err());
        let r = ImageRef::for_bytes(b"x");
        assert_eq!(r.as_str().parse::<ImageRef>().unwrap(), r);
    }
}
