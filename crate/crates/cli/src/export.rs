//! PNG export of images, labels and weight maps.

use std::path::Path;

use ecap_core::{ImageTensor, OneHotLabel};
use image::{GrayImage, Luma, Rgb, RgbImage};

/// Label colours by class id, cycled for ids past the end. Unpopulated
/// pixels are black.
pub const LABEL_PALETTE: [[u8; 3]; 10] = [
    [128, 64, 128],
    [70, 130, 180],
    [220, 20, 60],
    [0, 142, 0],
    [250, 170, 30],
    [119, 11, 32],
    [0, 60, 100],
    [190, 153, 153],
    [107, 142, 35],
    [255, 255, 255],
];

pub fn label_color(class: Option<usize>) -> [u8; 3] {
    class.map_or([0, 0, 0], |c| LABEL_PALETTE[c % LABEL_PALETTE.len()])
}

pub fn image_to_rgb(x: &ImageTensor) -> RgbImage {
    let (h, w) = x.dims();
    RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let p = x.pixel(r as usize, c as usize);
        Rgb(p.map(|v| (v * 255.0).round() as u8))
    })
}

pub fn label_to_rgb(y: &OneHotLabel) -> RgbImage {
    let w = y.width();
    RgbImage::from_fn(w as u32, y.height() as u32, |c, r| {
        Rgb(label_color(y.class_at(r as usize * w + c as usize)))
    })
}

/// Weights in [0, 1] as 8-bit grey.
pub fn weight_to_gray(q: &[f64], height: usize, width: usize) -> GrayImage {
    GrayImage::from_fn(width as u32, height as u32, |c, r| {
        let v = q[r as usize * width + c as usize].clamp(0.0, 1.0);
        Luma([(v * 255.0).round() as u8])
    })
}

pub fn save_image(x: &ImageTensor, path: &Path) -> image::ImageResult<()> {
    image_to_rgb(x).save(path)
}

pub fn save_label(y: &OneHotLabel, path: &Path) -> image::ImageResult<()> {
    label_to_rgb(y).save(path)
}

pub fn save_weights(q: &[f64], height: usize, width: usize, path: &Path) -> image::ImageResult<()> {
    weight_to_gray(q, height, width).save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_colours_and_unpopulated() {
        let y = OneHotLabel::from_classes(1, 3, 12, &[Some(0), None, Some(11)]).unwrap();
        let img = label_to_rgb(&y);
        assert_eq!(img.get_pixel(0, 0).0, LABEL_PALETTE[0]);
        assert_eq!(img.get_pixel(1, 0).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(2, 0).0, LABEL_PALETTE[1]);
    }

    #[test]
    fn image_and_weights_quantise() {
        let x = ImageTensor::new(1, 2, vec![0.0, 0.5, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let img = image_to_rgb(&x);
        assert_eq!(img.get_pixel(0, 0).0, [0, 128, 255]);
        let g = weight_to_gray(&[0.0, 1.0], 1, 2);
        assert_eq!(g.get_pixel(1, 0).0, [255]);
    }
}
