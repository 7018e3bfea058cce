//! Links the system OpenBLAS statically so `ndarray`'s BLAS-backed `dot`
//! resolves its CBLAS symbols.
//!
//! Static linkage matters beyond packaging: OpenBLAS selects its compute
//! kernels inside an ELF constructor. When the library is loaded dynamically
//! that constructor runs before any of our code, too early for the kernel
//! hint in `src/blas_hint.rs` to take effect on machines with masked CPU
//! model ids. Linked statically, the constructor becomes a regular
//! `.init_array` entry that runs after this crate's own, so the hint lands
//! first.

fn main() {
    let candidates = [
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib/aarch64-linux-gnu",
        "/usr/lib64",
        "/usr/lib",
        "/usr/local/lib",
    ];
    for dir in candidates {
        if std::path::Path::new(dir).join("libopenblas.a").exists() {
            println!("cargo:rustc-link-search=native={dir}");
            break;
        }
    }
    println!("cargo:rustc-link-lib=static=openblas");
    println!("cargo:rerun-if-changed=build.rs");
}
