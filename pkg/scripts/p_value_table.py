"""Recompute two-tailed p for the reference (t, df=58) pairs next to their printed values."""

from scipy import stats as sps

from wmerp.stats import p_from_t

# (comparison, t, printed p)
ROWS = [
    ("inhibition frontal P300 stimulus/distracter", 17.43, 0.0001),
    ("inhibition frontal N200 stimulus/distracter", 4.83, 0.0001),
    ("inhibition parietal P300 stimulus/distracter", 9.7, 0.0001),
    ("inhibition parietal N200 stimulus/distracter", 0.76, 0.0482),
    ("set-shifting frontal P300 similar/pair", 1.27, 0.2086),
    ("set-shifting frontal P300 similar/process", 5.18, 0.0001),
    ("set-shifting frontal P300 pair/process", 2.7, 0.009),
    ("set-shifting frontal P200 similar/pair", 3.73, 0.0004),
    ("set-shifting frontal P200 similar/process", 0.03, 0.9705),
    ("set-shifting frontal P200 pair/process", 3.25, 0.0019),
    ("set-shifting parietal P300 similar/pair", 4.32, 0.0001),
    ("set-shifting parietal P300 similar/process", 5.69, 0.0001),
    ("set-shifting parietal P300 pair/process", 2.05, 0.0441),
    ("set-shifting parietal P200 similar/pair", 21.46, 0.0001),
    ("set-shifting parietal P200 similar/process", 6.73, 0.0001),
    ("set-shifting parietal P200 pair/process", 21.46, 0.0001),
]


def main():
    print("comparison,t,printed_p,computed_p,scipy_p,abs_diff")
    for name, t, printed in ROWS:
        p = p_from_t(t, 58)
        print(f"{name},{t},{printed},{p:.5f},{2 * sps.t.sf(t, 58):.5f},{abs(p - printed):.5f}")


if __name__ == "__main__":
    main()
