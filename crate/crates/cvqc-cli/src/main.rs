fn main() {
    println!("cvqc");
}
