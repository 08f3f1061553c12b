//! The three building blocks on small inputs: comparison over bit-planes,
//! the diagonal matrix-vector product, and the balanced AND.

use packed_forest::bits::Bits;
use packed_forest::kernels::{load_planes, mat_mul, mult_all, sec_comp, PackedMatrix};
use packed_forest::staging::{BitPlanes, DiagMatrix};
use packed_forest::vm::{Kind, Vm};

fn main() {
    let vm = Vm::new();

    let a = [5u64, 3, 9, 12];
    let b = [3u64, 3, 10, 4];
    let pa = load_planes(&vm, &BitPlanes::from_values(&a, 4), Kind::Ciphertext);
    let pb = load_planes(&vm, &BitPlanes::from_values(&b, 4), Kind::Ciphertext);
    let gt = sec_comp(&vm, &pa, &pb).unwrap();
    println!("{a:?} > {b:?} = {} (depth {})", gt.peek(), gt.depth());

    let dense: Vec<Bits> = ["010", "001", "100", "000"]
        .iter()
        .map(|r| r.parse().unwrap())
        .collect();
    let diag = DiagMatrix::from_dense(&dense, 3);
    println!(
        "diagonals {:?}",
        diag.diagonals
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
    );
    let m = PackedMatrix::load(&vm, &diag, Kind::Plaintext);
    let v = vm.encrypt(&"110".parse().unwrap());
    let mv = mat_mul(&vm, &m, &v).unwrap();
    println!(
        "M * 110 = {} (depth {}, plaintext matrix)",
        mv.peek(),
        mv.depth()
    );

    let vs: Vec<_> = ["1111", "1101", "0111", "1110", "1111"]
        .iter()
        .map(|s| vm.encrypt(&s.parse().unwrap()))
        .collect();
    let all = mult_all(&vm, &vs).unwrap();
    println!("AND of 5 vectors = {} (depth {})", all.peek(), all.depth());
    println!("{}", vm.snapshot());
}
