use saliency::sift::{keypoints, sift_density_channel, Keypoint, SiftParams};
use saliency::Plane;

fn blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        0.2 + 0.6 * (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

fn nearest(kps: &[Keypoint], x: f64, y: f64) -> Option<&Keypoint> {
    kps.iter().min_by(|a, b| {
        let da = (a.x - x).hypot(a.y - y);
        let db = (b.x - x).hypot(b.y - y);
        da.total_cmp(&db)
    })
}

#[test]
fn isolated_blob_yields_a_keypoint_at_its_center() {
    // With s+2 levels per octave the scales between the last DoG of one
    // octave and the first checked DoG of the next are not searched, so the
    // blob sizes here stay clear of that gap.
    for (cx, cy, sigma) in [(64.0, 64.0, 2.5), (40.0, 90.0, 3.0), (97.0, 31.0, 6.0)] {
        let kps = keypoints(&blob(128, 128, cx, cy, sigma), &SiftParams::default()).unwrap();
        let k = nearest(&kps, cx, cy).unwrap_or_else(|| panic!("no keypoint for ({cx}, {cy})"));
        assert!((k.x - cx).hypot(k.y - cy) < 1.5, "{k:?} for blob at ({cx}, {cy})");
    }
}

#[test]
fn mirrored_image_gives_mirrored_keypoints() {
    let img = Plane::from_fn(128, 128, |x, y| {
        let b1 = blob(128, 128, 35.0, 50.0, 3.0).get(x, y);
        let b2 = blob(128, 128, 88.0, 80.0, 5.0).get(x, y);
        b1 + b2 - 0.2
    });
    let mirrored = Plane::from_fn(128, 128, |x, y| img.get(127 - x, y));
    let p = SiftParams::default();
    let a = keypoints(&img, &p).unwrap();
    let b = keypoints(&mirrored, &p).unwrap();
    assert!(!a.is_empty());
    for k in &b {
        // Decimation samples even columns, so the mirror is exact only up to
        // one pixel of the octave the keypoint came from.
        let m = nearest(&a, 127.0 - k.x, k.y).unwrap();
        let tol = 1.5 * (k.scale / p.base_sigma).max(1.0);
        assert!((m.x - (127.0 - k.x)).hypot(m.y - k.y) <= tol, "{k:?} has no mirror partner");
    }
}

#[test]
fn detected_scale_follows_blob_size() {
    let p = SiftParams::default();
    let scale_of = |sigma: f64| {
        let kps = keypoints(&blob(128, 128, 64.0, 64.0, sigma), &p).unwrap();
        nearest(&kps, 64.0, 64.0).unwrap().scale
    };
    let ratio = scale_of(6.0) / scale_of(3.0);
    assert!((ratio - 2.0).abs() < 0.5, "scale ratio {ratio}");
}

#[test]
fn density_channel_peaks_at_keypoints() {
    let kps = [
        Keypoint { x: 20.0, y: 30.0, scale: 2.0, contrast: 0.1 },
        Keypoint { x: 90.0, y: 70.0, scale: 2.0, contrast: 0.1 },
        Keypoint { x: 91.0, y: 71.0, scale: 2.0, contrast: 0.1 },
    ];
    let d = sift_density_channel(&kps, 128, 128, 4.0).unwrap();
    let (x, y) = d.argmax();
    assert!((x as f64 - 90.5).abs() <= 1.0 && (y as f64 - 70.5).abs() <= 1.0);
    assert_eq!(d.min_max().1, 1.0);
    let lone = d.get(20, 30);
    assert!(lone > 0.4 && lone < 0.6, "single-keypoint peak {lone}");
}
