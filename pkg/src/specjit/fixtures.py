"""Reference programs used by tests, benchmarks and the README."""

P1 = """\
fn loss_fn(x, y) {
  let y_ = 0.5 * x + 1.5
  return (y_ - y) ** 2
}
"""

P1_DRIVER = P1 + """\
let total = 0.0
for i in range(5) {
  total = total + loss_fn(1.0 * i, 2.0)
}
print(total)
"""

P2 = """\
let model = record { state: 0.0 }
fn step(seq) {
  let s = model.state
  let out = 0.0
  for item in seq {
    s = s + item
    out = out + s
  }
  model.state = s
  return out
}
"""

P2_DRIVER = P2 + """\
for k in range(5) {
  print(step([1.0, 2.0, 3.0]), model.state)
}
"""

# P2 driven with varying list lengths: four length-3 calls, then others.
P3_DRIVER = P2 + """\
let lengths = [3, 3, 3, 3, 4, 5, 2, 7, 1, 3]
for n in lengths {
  let seq = []
  for j in range(n) {
    append(seq, 0.5 * j)
  }
  print(step(seq), model.state)
}
"""

P4 = """\
fn fact(n) {
  if n <= 1 {
    return 1
  }
  return n * fact(n - 1)
}
"""

P4_DRIVER = P4 + """\
for k in [3, 5, 1, 6, 10, 21, 4] {
  print(fact(k))
}
"""

P5 = """\
let TRAINING = true
fn forward(x, w) {
  let h = x * w
  if TRAINING {
    h = h * 0.5
  }
  return h
}
"""

P5_DRIVER = P5 + """\
let acc = 0.0
for k in range(6) {
  acc = acc + forward(1.0 * k, 3.0)
}
print(acc)
"""

# Hot scalar function: about 10k arithmetic operations per call, guarded by
# a stable entry branch and two promoted config reads.
SCALAR_BENCH = """\
let cfg = record { decay: 0.999, gain: 0.001 }
fn hot(x, y) {
  let a = x
  let b = y
  if a > 100.0 {
    a = 100.0
  }
  let d = cfg.decay
  let g = cfg.gain
  for i in range(1250) {
    a = a * d + b * g
    b = b - a * 0.0001 + 0.5
  }
  return a + b
}
"""

# Fixed trip count loop for the unrolling comparison.
UNROLL_BENCH = """\
fn unrolled(x) {
  let acc = x
  for i in range(400) {
    acc = acc * 0.5 + i
  }
  return acc
}
"""

# Two independent chains of (delay-instrumented) tensor builtins.
TWO_CHAINS = """\
fn two(a, b) {
  let x = tanh(a)
  let y = tanh(b)
  return sum(x) + sum(y)
}
fn one(a) {
  let x = tanh(a)
  return sum(x)
}
"""

ALL = {
    "p1": P1_DRIVER, "p2": P2_DRIVER, "p3": P3_DRIVER, "p4": P4_DRIVER, "p5": P5_DRIVER,
}
