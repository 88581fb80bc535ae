# Symbolic reference values frozen into crates/core/tests/derived.rs.
import sympy as sp
x, y, t = sp.symbols('x y t', real=True)
nu = 1
def forcing(u1, u2, p):
    f1 = sp.diff(u1, t) + u1*sp.diff(u1, x) + u2*sp.diff(u1, y) - nu*(sp.diff(u1, x, 2)+sp.diff(u1, y, 2)) + sp.diff(p, x)
    f2 = sp.diff(u2, t) + u1*sp.diff(u2, x) + u2*sp.diff(u2, y) - nu*(sp.diff(u2, x, 2)+sp.diff(u2, y, 2)) + sp.diff(p, y)
    return f1, f2
# example 2
e = sp.exp(t)
u1 = e*sp.sin(sp.pi*x)**2*sp.sin(2*sp.pi*y)
u2 = -e*sp.sin(2*sp.pi*x)*sp.sin(sp.pi*y)**2
p = e*(sp.sin(sp.pi*y) - 2/sp.pi)
f1, f2 = forcing(u1, u2, p)
for pt in [(sp.Rational(1,2), sp.Rational(1,4), 0), (sp.Rational(1,3), sp.Rational(3,4), sp.Rational(1,2))]:
    s = dict(zip((x, y, t), pt))
    print("ex2 f at", pt, sp.N(f1.subs(s), 20), sp.N(f2.subs(s), 20))
print("ex2 E(0)", sp.nsimplify(sp.integrate(sp.integrate((u1**2+u2**2)/2, (x,0,1)), (y,0,1)).subs(t,0)))
print("ex2 mean p", sp.simplify(sp.integrate(p,(y,0,1))))
# example 1
a = lambda z: z**2*(z-1)**2
b = lambda z: z*(z-1)*(2*z-1)
s = e/256
v1 = -s*a(x)*b(y); v2 = s*b(x)*a(y)
q = e*(x**3 - sp.Rational(1,4))
E0 = sp.integrate(sp.integrate((v1**2+v2**2)/2, (x,0,1)), (y,0,1)).subs(t,0)
print("ex1 E(0)", E0, sp.N(E0, 20))
g1, g2 = forcing(v1, v2, q)
pt = (sp.Rational(1,4), sp.Rational(2,3), sp.Rational(1,5))
sub = dict(zip((x,y,t), pt))
print("ex1 f at", pt, sp.N(g1.subs(sub), 20), sp.N(g2.subs(sub), 20))
print("ex1 mean p", sp.integrate(q,(x,0,1)))
