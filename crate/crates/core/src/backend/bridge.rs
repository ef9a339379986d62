//! Pretrained encoder/generator served by a PyTorch worker process.
//!
//! Model weights are never vendored. The worker loads TorchScript exports
//! named in [`BridgeConfig`] and talks a small framed protocol over its
//! stdin/stdout (see `python/torch_worker.py`).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::masks::{FaceParser, LabelMap, MaskError};
use super::{BackendError, GeneratorBackend};
use crate::latent::{LatentCode, LatentShape};
use crate::raster::Image;

const WORKER_SOURCE: &str = include_str!("../../python/torch_worker.py");

const SETUP_HINT: &str = "export the encoder and generator as TorchScript and point \
    CANVAS_BLEND_ENCODER / CANVAS_BLEND_GENERATOR (or [real] in the config file) at them";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub python: PathBuf,
    pub encoder: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub parser: Option<PathBuf>,
    pub encoder_size: u32,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            python: PathBuf::from("python3"),
            encoder: None,
            generator: None,
            parser: None,
            encoder_size: 256,
        }
    }
}

struct Pipe {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct TorchBridge {
    shape: LatentShape,
    size: (u32, u32),
    has_parser: bool,
    pipe: Mutex<Pipe>,
    child: Mutex<Child>,
    _script: tempfile::TempPath,
}

fn unavailable(reason: impl Into<String>, hint: impl Into<String>) -> BackendError {
    BackendError::Unavailable {
        reason: reason.into(),
        hint: hint.into(),
    }
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, BackendError> {
    match path {
        Some(p) if p.is_file() => Ok(p.clone()),
        Some(p) => Err(unavailable(
            format!("{what} model not found at {}", p.display()),
            SETUP_HINT,
        )),
        None => Err(unavailable(format!("no {what} model configured"), SETUP_HINT)),
    }
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_f32(raw: &[u8]) -> Vec<f32> {
    raw.chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

impl Pipe {
    fn read_header(&mut self) -> Result<Value, BackendError> {
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| BackendError::Failure(format!("worker read: {e}")))?;
        if n == 0 {
            return Err(BackendError::Failure("worker exited".into()));
        }
        let header: Value = serde_json::from_str(&line)
            .map_err(|e| BackendError::Failure(format!("bad worker header {line:?}: {e}")))?;
        if header["ok"].as_bool() != Some(true) {
            let err = header["error"].as_str().unwrap_or("unknown error").to_string();
            return Err(match header["hint"].as_str() {
                Some(hint) => unavailable(err, hint),
                None => BackendError::Failure(err),
            });
        }
        Ok(header)
    }

    fn read_payload(&mut self, len: usize) -> Result<Vec<u8>, BackendError> {
        let mut buf = vec![0u8; len];
        self.stdout
            .read_exact(&mut buf)
            .map_err(|e| BackendError::Failure(format!("worker payload: {e}")))?;
        Ok(buf)
    }

    fn request(&mut self, header: Value, payload: &[u8]) -> Result<Value, BackendError> {
        let mut send = || -> std::io::Result<()> {
            writeln!(self.stdin, "{header}")?;
            self.stdin.write_all(payload)?;
            self.stdin.flush()
        };
        send().map_err(|e| BackendError::Failure(format!("worker write: {e}")))?;
        self.read_header()
    }
}

fn dim(v: &Value) -> Option<u32> {
    v.as_u64().and_then(|n| u32::try_from(n).ok())
}

impl TorchBridge {
    pub fn spawn(config: &BridgeConfig) -> Result<Self, BackendError> {
        let encoder = required(&config.encoder, "encoder")?;
        let generator = required(&config.generator, "generator")?;
        let parser = match &config.parser {
            Some(_) => Some(required(&config.parser, "parser")?),
            None => None,
        };

        let mut script = tempfile::Builder::new()
            .suffix(".py")
            .tempfile()
            .map_err(|e| BackendError::Failure(format!("worker script: {e}")))?;
        script
            .write_all(WORKER_SOURCE.as_bytes())
            .map_err(|e| BackendError::Failure(format!("worker script: {e}")))?;
        let script = script.into_temp_path();

        let mut cmd = Command::new(&config.python);
        cmd.arg("-u")
            .arg(&script)
            .arg("--encoder")
            .arg(&encoder)
            .arg("--generator")
            .arg(&generator)
            .arg("--encoder-size")
            .arg(config.encoder_size.to_string());
        if let Some(p) = &parser {
            cmd.arg("--parser").arg(p);
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                unavailable(
                    format!("cannot start {}: {e}", config.python.display()),
                    "install python3 with PyTorch or set [real].python",
                )
            })?;
        let mut pipe = Pipe {
            stdin: child.stdin.take().expect("piped"),
            stdout: BufReader::new(child.stdout.take().expect("piped")),
        };

        let hello = pipe.read_header()?;
        let latent = &hello["latent"];
        let size = &hello["size"];
        let (Some(layers), Some(width), Some(w), Some(h)) =
            (dim(&latent[0]), dim(&latent[1]), dim(&size[0]), dim(&size[1]))
        else {
            return Err(BackendError::Failure(format!("bad worker hello: {hello}")));
        };
        let shape = LatentShape::new(layers as usize, width as usize)?;
        tracing::info!(?shape, width = w, height = h, "pretrained backend ready");

        Ok(Self {
            shape,
            size: (w, h),
            has_parser: hello["parser"].as_bool().unwrap_or(false),
            pipe: Mutex::new(pipe),
            child: Mutex::new(child),
            _script: script,
        })
    }

    pub fn has_parser(&self) -> bool {
        self.has_parser
    }

    fn image_from(&self, header: &Value, pipe: &mut Pipe) -> Result<Image, BackendError> {
        let (Some(w), Some(h)) = (dim(&header["width"]), dim(&header["height"])) else {
            return Err(BackendError::Failure(format!("bad image header: {header}")));
        };
        let raw = pipe.read_payload(w as usize * h as usize * 12)?;
        Image::new(w, h, bytes_f32(&raw)).map_err(|e| BackendError::Failure(e.to_string()))
    }
}

impl Drop for TorchBridge {
    fn drop(&mut self) {
        let _ = writeln!(self.pipe.lock().stdin, "{}", json!({"op": "quit"}));
        let _ = self.child.lock().wait();
    }
}

impl GeneratorBackend for TorchBridge {
    fn name(&self) -> &str {
        "real"
    }

    fn latent_shape(&self) -> LatentShape {
        self.shape
    }

    fn output_size(&self) -> (u32, u32) {
        self.size
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn is_reentrant(&self) -> bool {
        false
    }

    fn encode(&self, image: &Image) -> Result<LatentCode, BackendError> {
        let mut pipe = self.pipe.lock();
        let header = json!({"op": "encode", "width": image.width(), "height": image.height()});
        let reply = pipe.request(header, &f32_bytes(image.as_slice()))?;
        let len = reply["len"].as_u64().unwrap_or(0) as usize;
        let values = bytes_f32(&pipe.read_payload(len * 4)?);
        Ok(LatentCode::from_vec(self.shape, values)?)
    }

    fn generate(&self, latent: &LatentCode) -> Result<Image, BackendError> {
        latent.ensure_shape(self.shape)?;
        let mut pipe = self.pipe.lock();
        let header = json!({"op": "generate", "layers": self.shape.layers, "dims": self.shape.width});
        let reply = pipe.request(header, &f32_bytes(latent.as_slice()))?;
        self.image_from(&reply, &mut pipe)
    }
}

impl FaceParser for TorchBridge {
    fn parse(&self, image: &Image) -> Result<LabelMap, MaskError> {
        let mut pipe = self.pipe.lock();
        let header = json!({"op": "parse", "width": image.width(), "height": image.height()});
        let reply = pipe
            .request(header, &f32_bytes(image.as_slice()))
            .map_err(|e| MaskError::Parser(e.to_string()))?;
        let (Some(width), Some(height)) = (dim(&reply["width"]), dim(&reply["height"])) else {
            return Err(MaskError::Parser(format!("bad label header: {reply}")));
        };
        let labels = pipe
            .read_payload(width as usize * height as usize)
            .map_err(|e| MaskError::Parser(e.to_string()))?;
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }
}
