"""Reference trace of the limit-variable sampler.

Re-implements the Philox4x32-10 block function, the sign-bit layout and the
Gaussian remainder from scratch and evaluates the first draws with mpmath, so
the frozen values do not depend on the C++ lookup tables or summation order.

Key: splitmix64(seed) split into 32-bit halves, low half first.
Layout: sample i uses counters (b, i_lo, i_hi, 0). Blocks b < K/128 supply the
signs of terms 1..K, 32 bits per word, word order r0..r3, bit t of the stream
<-> term t+1, set bit = +1. Block K/128 feeds Box-Muller with u1 from (r0, r1)
and u2 from (r2, r3).
"""

import sys

import mpmath as mp

M32 = 0xFFFFFFFF


def splitmix_key(seed):
    M64 = (1 << 64) - 1
    z = (seed + 0x9E3779B97F4A7C15) & M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    z ^= z >> 31
    return (z & M32, z >> 32)


def philox(ctr, key):
    c = list(ctr)
    k0, k1 = key
    for r in range(10):
        if r:
            k0 = (k0 + 0x9E3779B9) & M32
            k1 = (k1 + 0xBB67AE85) & M32
        p0 = 0xD2511F53 * c[0]
        p1 = 0xCD9E8D57 * c[2]
        c = [((p1 >> 32) ^ c[1] ^ k0) & M32, p1 & M32, ((p0 >> 32) ^ c[3] ^ k1) & M32, p0 & M32]
    return c


def rho(h, k):
    e = 2 * h
    return ((k + 1) ** e + (k - 1) ** e - 2 * mp.mpf(k) ** e) / 2


def c_H(H):
    return mp.sqrt(2 * H * mp.gamma(mp.mpf(3) / 2 - H) / (mp.gamma(H + mp.mpf(1) / 2) * mp.gamma(2 - 2 * H)))


def tail_sum_sq(h, K):
    # sum_{k>K} rho^2 = total - partial; total from golden.py's resummed tail
    sys.path.insert(0, __file__.rsplit("/", 1)[0])
    import golden

    return golden.rho_sq_total(h, 400) - mp.fsum(rho(h, k) ** 2 for k in range(1, K + 1))


def uniform(hi, lo):
    bits = ((hi << 32) | lo) >> 12
    return (mp.mpf(bits) + mp.mpf(1) / 2) * mp.mpf(2) ** -52


def main():
    mp.mp.dps = 30
    H = mp.mpf("0.7")
    h = H / 2 + mp.mpf(1) / 4
    K = 4096
    seed = 42
    key = splitmix_key(seed)
    g = c_H(H) / (H + mp.mpf(1) / 2)
    rhos = [rho(h, k) for k in range(1, K + 1)]
    tail_sd = 2 * g * mp.sqrt(tail_sum_sq(h, K))
    print(f"tail_sd = {mp.nstr(tail_sd, 20)}")
    for i in range(5):
        acc = mp.mpf(0)
        t = 0
        for b in range(K // 128):
            for word in philox((b, i & M32, i >> 32, 0), key):
                for bit in range(32):
                    acc += rhos[t] if (word >> bit) & 1 else -rhos[t]
                    t += 1
        r = philox((K // 128, i & M32, i >> 32, 0), key)
        z = mp.sqrt(-2 * mp.log(uniform(r[0], r[1]))) * mp.cos(2 * mp.pi * uniform(r[2], r[3]))
        print(f"sample[{i}] = {mp.nstr(2 * g * acc + tail_sd * z, 20)}")


if __name__ == "__main__":
    main()
