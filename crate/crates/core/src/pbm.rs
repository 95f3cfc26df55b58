//! Image I/O. Portable bitmaps (P1 plain, P4 raw) with black = 1 = inclusion,
//! plus PNG ingest restricted to two grey levels.

use std::fmt::Write as _;
use std::io::{BufReader, Cursor};
use std::path::Path;

use crate::error::{Result, TsrError};
use crate::grid::BinaryImage;

/// Reads a PBM (P1/P4) or two-level PNG, chosen by magic bytes.
pub fn read_image(path: &Path) -> Result<BinaryImage> {
    let bytes = std::fs::read(path)?;
    let err = |reason: String| TsrError::Image {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes).map_err(err)
    } else {
        decode_pbm(&bytes).map_err(err)
    }
}

/// Writes plain P1.
pub fn write_pbm(path: &Path, image: &BinaryImage) -> Result<()> {
    std::fs::write(path, encode_pbm(image))?;
    Ok(())
}

pub fn encode_pbm(image: &BinaryImage) -> String {
    let n = image.side();
    let mut out = format!("P1\n{n} {n}\n");
    for r in 0..n {
        for c in 0..n {
            if c > 0 {
                out.push(' ');
            }
            out.push(if image.get(r, c) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// ASCII-art rendering, one row per line.
pub fn to_ascii(image: &BinaryImage) -> String {
    let n = image.side();
    let mut out = String::with_capacity(n * (n + 1));
    for r in 0..n {
        for c in 0..n {
            out.push(if image.get(r, c) { '#' } else { '.' });
        }
        writeln!(out).unwrap();
    }
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "expected a number in header".to_string())
    }
}

pub fn decode_pbm(bytes: &[u8]) -> Result<BinaryImage, String> {
    let raw = match bytes.get(..2) {
        Some(b"P1") => false,
        Some(b"P4") => true,
        _ => return Err("not a P1/P4 bitmap".into()),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    if width != height {
        return Err(format!("image must be square, got {width}x{height}"));
    }
    if width == 0 {
        return Err("empty image".into());
    }
    let mut cells = Vec::with_capacity(width * height);
    if raw {
        // exactly one whitespace byte after the height
        let start = h.pos + 1;
        let stride = width.div_ceil(8);
        let data = bytes
            .get(start..start + stride * height)
            .ok_or("truncated raster")?;
        for r in 0..height {
            for c in 0..width {
                let byte = data[r * stride + c / 8];
                cells.push(byte & (0x80 >> (c % 8)) != 0);
            }
        }
    } else {
        while cells.len() < width * height {
            h.skip_space_and_comments();
            match bytes.get(h.pos) {
                Some(b'0') => cells.push(false),
                Some(b'1') => cells.push(true),
                Some(&b) => return Err(format!("unexpected byte {:?} in raster", b as char)),
                None => return Err("truncated raster".into()),
            }
            h.pos += 1;
        }
    }
    BinaryImage::from_cells(width, cells).map_err(|e| e.to_string())
}

pub fn decode_png(bytes: &[u8]) -> Result<BinaryImage, String> {
    let mut decoder = png::Decoder::new(BufReader::new(Cursor::new(bytes)));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let size = reader
        .output_buffer_size()
        .ok_or("png output buffer too large")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width as usize, info.height as usize);
    if w != h {
        return Err(format!("image must be square, got {w}x{h}"));
    }
    let channels = info.color_type.samples();
    let mut grey = Vec::with_capacity(w * h);
    for r in 0..h {
        let line = &buf[r * info.line_size..];
        for c in 0..w {
            let px = &line[c * channels..(c + 1) * channels];
            let colour = if channels >= 3 { &px[..3] } else { &px[..1] };
            if colour.iter().any(|&v| v != colour[0]) {
                return Err("png contains non-grey pixels".into());
            }
            grey.push(colour[0]);
        }
    }
    let mut levels: Vec<u8> = grey.clone();
    levels.sort_unstable();
    levels.dedup();
    let black_level = match levels.as_slice() {
        [one] if *one < 128 => *one,
        [_] => return BinaryImage::from_cells(w, vec![false; w * h]).map_err(|e| e.to_string()),
        [dark, _] => *dark,
        _ => return Err(format!("png has {} grey levels, expected 2", levels.len())),
    };
    BinaryImage::from_cells(w, grey.iter().map(|&g| g == black_level).collect())
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_roundtrip() {
        let img = BinaryImage::from_ascii(&["#..", ".##", "..#"]).unwrap();
        let text = encode_pbm(&img);
        assert_eq!(text, "P1\n3 3\n1 0 0\n0 1 1\n0 0 1\n");
        assert_eq!(decode_pbm(text.as_bytes()).unwrap(), img);
    }

    #[test]
    fn plain_with_comments_and_packed_digits() {
        let text = "P1\n# expected: nothing\n3 # width\n3\n100\n011 001\n";
        let img = decode_pbm(text.as_bytes()).unwrap();
        assert_eq!(img, BinaryImage::from_ascii(&["#..", ".##", "..#"]).unwrap());
    }

    #[test]
    fn raw_p4() {
        let mut bytes = b"P4\n9 9\n".to_vec();
        for r in 0..9 {
            // pixel (r, 8) black, rest white: second byte MSB
            bytes.push(if r == 0 { 0x80 } else { 0 });
            bytes.push(0x80);
        }
        let img = decode_pbm(&bytes).unwrap();
        assert!(img.get(0, 0));
        assert!((0..9).all(|r| img.get(r, 8)));
        assert_eq!(img.black_count(), 10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pbm(b"P2\n2 2\n").is_err());
        assert!(decode_pbm(b"P1\n2 3\n000000").is_err());
        assert!(decode_pbm(b"P1\n2 2\n01").is_err());
        assert!(decode_pbm(b"P1\n2 2\n0120").is_err());
    }

    fn png_bytes(side: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, side, side);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(pixels).unwrap();
        }
        out
    }

    #[test]
    fn png_two_levels() {
        let img = decode_png(&png_bytes(2, &[0, 255, 255, 0])).unwrap();
        assert_eq!(img, BinaryImage::from_ascii(&["#.", ".#"]).unwrap());
        assert!(decode_png(&png_bytes(2, &[0, 128, 255, 0])).is_err());
        assert_eq!(decode_png(&png_bytes(2, &[255; 4])).unwrap().black_count(), 0);
    }
}
