"""Golden Adam trajectory on f(theta) = theta^2 from theta = 0.5."""

import math

theta, lr, b1, b2, eps = 0.5, 0.1, 0.9, 0.999, 1e-8
m = v = 0.0
out = []
for t in range(1, 6):
    g = 2.0 * theta
    m = b1 * m + (1.0 - b1) * g
    v = b2 * v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    theta -= lr * m_hat / (math.sqrt(v_hat) + eps)
    out.append(theta)
print("adam_golden = {" + ", ".join(repr(x) for x in out) + "}")
