#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread::{self, JoinHandle};

use image::{ImageBuffer, ImageFormat, Luma};

/// A grayscale JPEG of a bright disk, varied by `k`.
pub fn disk_jpeg(k: u32) -> Vec<u8> {
    let img: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_fn(48, 40, |x, y| {
        let dx = x as f64 - 24.0;
        let dy = y as f64 - 20.0;
        Luma([if dx * dx + dy * dy <= (8.0 + k as f64).powi(2) {
            230
        } else {
            20
        }])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Jpeg).unwrap();
    out.into_inner()
}

/// Body of a multipart/x-mixed-replace response.
pub fn multipart_body(parts: &[Vec<u8>], boundary: &str, with_length: bool) -> Vec<u8> {
    let mut out = Vec::new();
    for p in parts {
        out.extend_from_slice(format!("--{boundary}\r\nContent-Type: image/jpeg\r\n").as_bytes());
        if with_length {
            out.extend_from_slice(format!("Content-Length: {}\r\n", p.len()).as_bytes());
        }
        out.extend_from_slice(b"\r\n");
        out.extend_from_slice(p);
        out.extend_from_slice(b"\r\n");
    }
    out
}

/// Serves one HTTP response on a loopback port, then closes the connection.
/// Returns the URL and the server thread.
pub fn serve_once(content_type: &str, body: Vec<u8>) -> (String, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let head = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: {content_type}\r\nConnection: close\r\nCache-Control: no-cache\r\n\r\n"
    );
    let handle = thread::spawn(move || {
        let (mut sock, _) = listener.accept().unwrap();
        drain_request(&mut sock);
        let _ = sock.write_all(head.as_bytes());
        let _ = sock.write_all(&body);
        let _ = sock.flush();
    });
    (format!("http://{addr}/stream.mjpg"), handle)
}

fn drain_request(sock: &mut TcpStream) {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    while !buf.ends_with(b"\r\n\r\n") {
        match sock.read(&mut byte) {
            Ok(1) => buf.push(byte[0]),
            _ => return,
        }
    }
}
