"""Independent great-circle oracle: unit-vector dot/cross (atan2) form, not haversine."""
import math

R = 6371.0088


def unit(lat, lon):
    la, lo = math.radians(lat), math.radians(lon)
    return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))


def distance_km(a, b):
    u, v = unit(*a), unit(*b)
    cross = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
    dot = sum(x * y for x, y in zip(u, v))
    return R * math.atan2(math.sqrt(sum(c * c for c in cross)), dot)


if __name__ == "__main__":
    print(repr(distance_km((30.2672, -97.7431), (29.7604, -95.3698))))
    print(repr(distance_km((0.0, 0.0), (0.0, 1.0))))
