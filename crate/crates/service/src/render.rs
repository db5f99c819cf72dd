use std::io::Cursor;

use base64::Engine;
use image::{ImageFormat, Rgb, RgbImage};

use replica_core::geometry::PointCloud;

use crate::api::EncodedImage;

pub const THUMBNAIL_PX: u32 = 64;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const DEFAULT_INK: Rgb<u8> = Rgb([60, 60, 60]);

/// Orthographic view along +y: image x is world x, image up is world z.
/// Nearer points (smaller y) are drawn last. The cloud is fit with a margin
/// and equal scale on both axes.
pub fn front_view_png(cloud: &PointCloud, size: u32) -> Vec<u8> {
    let mut img = RgbImage::from_pixel(size, size, BACKGROUND);
    if let Ok(b) = cloud.aabb() {
        let e = b.extent();
        let span = e.x.max(e.z).max(1e-9);
        let usable = size as f64 * 0.9;
        let k = usable / span;
        let ox = (size as f64 - e.x * k) / 2.0;
        let oz = (size as f64 - e.z * k) / 2.0;
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        let pts = cloud.points();
        order.sort_by(|&i, &j| pts[j].y.total_cmp(&pts[i].y).then(i.cmp(&j)));
        for i in order {
            let p = pts[i];
            let px = (ox + (p.x - b.min.x) * k).floor().clamp(0.0, size as f64 - 1.0) as u32;
            let pz = (oz + (p.z - b.min.z) * k).floor().clamp(0.0, size as f64 - 1.0) as u32;
            let ink = cloud
                .colors()
                .map(|c| Rgb(c[i].map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)))
                .unwrap_or(DEFAULT_INK);
            img.put_pixel(px, size - 1 - pz, ink);
        }
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory");
    out.into_inner()
}

pub fn png_payload(bytes: &[u8]) -> EncodedImage {
    EncodedImage {
        mime: "image/png".into(),
        data: base64::engine::general_purpose::STANDARD.encode(bytes),
    }
}
