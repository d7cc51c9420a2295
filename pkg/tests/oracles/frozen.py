"""Frozen mpmath oracle values; regenerate with ``generate.py``."""

BESSEL_I = {
    (0, 0.5): 1.0634833707413235193,
    (1, 2): 1.5906368546373290634,
    (3, 10): 1758.3807166108532381,
    (10, 30): 145831809975.96712377,
    (0, 100): 1.0737517071310738235e+42,
    (5, 300): 4.2928905790140089044e+128,
    (20, 1): 3.9668359858190200557e-25,
    (2, 0.1): 0.001251041992241759263,
}
PN = {
    (0, 1): 0.44638996589653450705,
    (2, 5): 0.11803241632868366792,
    (10, 30): 0.023523340953213736421,
    (64, 10): 0.0076479881987728474486,
    (0, 100): 0.0099498737300516876559,
    (5, 100): 0.0094624926801575801563,
    (10, 100): 0.0090002525218810775349,
    (1, 0.01): 0.2499989583398437066,
    (30, 0.3): 0.016128666444291150544,
}
BESSEL_I_D2 = {
    (0, 1): 0.70090677375952330839,
    (2, 3): 2.4242306624157154589,
    (5, 0.5): 0.00066539262917657386531,
}
G2_AT_4 = 0.55359836872474901353
CRITICAL_RADIUS = 2.4123050607821553895
R0_STANDARD = 1.4900673023229442057
BALANCE_AT_R0 = -2.4018072934818471879e-52
MU_STAR_STANDARD = 31.055778201625397889
MU_N_STANDARD = {
    2: 31.055778201625397889,
    3: 85.428811268439135195,
    5: 339.12602833923596736,
    10: 2473.4559800034626066,
}
