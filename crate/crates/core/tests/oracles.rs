//! Checks against high-precision values produced by `oracles/oracle.py`.
#![allow(clippy::excessive_precision)]

use flatcusp_core::corner::{reduced_step, reduced_step_extended, ReducedState};
use flatcusp_core::dynamics::first_hit;
use flatcusp_core::geometry::*;

struct Ray {
    pos: [f64; 2],
    dir: [f64; 2],
    skip: &'static str,
    hit: &'static str,
    t: f64,
    at: [f64; 2],
}

const ARCLENGTH_HALF: f64 = 0.503098443207038720807109203861;
const REDUCED_S1: f64 = 0.0979109793223053683181566275748;
const REDUCED_V1: f64 = 0.319172532425908739995886538074;

#[rustfmt::skip]
const RAYS: [Ray; 20] = [
    Ray { pos: [0.8014576457404357, 0.053973759826109496], dir: [-0.9969374994926691, -0.07820244309038253], skip: "wall", hit: "upper", t: 0.3894286464279815767231422, at: [0.4132216247397089650461995, 0.02351948826606056673240511] },
    Ray { pos: [0.8008818703536235, 0.0419876530890478], dir: [-0.9979796532699644, -0.06353433449058636], skip: "wall", hit: "upper", t: 0.4711535990933508663834857, at: [0.3306801648935453456754878, 0.01205322272780721588867594] },
    Ray { pos: [0.8004499662510125, 0.029995500202495588], dir: [-0.9988849229852894, -0.047211340085539], skip: "wall", hit: "lower", t: 0.6566584887884896311861382, at: [0.1445237022498855039267462, -0.001006227031753892947130116] },
    Ray { pos: [0.8001619956260473, 0.017999028015746196], dir: [-0.9995706383706036, -0.02930083458511037], skip: "wall", hit: "lower", t: 0.6517117020760624508131108, at: [0.1487301135482849395286406, -0.001096668763965240880939014] },
    Ray { pos: [0.8000179999460001, 0.005999964000064706], dir: [-0.9999497457365772, -0.010025268143776345], skip: "wall", hit: "lower", t: 0.6706046778873994869063645, at: [0.1294470228027356897549237, -0.0007230277142272374090653802] },
    Ray { pos: [0.8000179999460001, -0.005999964000064461], dir: [-0.9999481246246787, 0.01018567914219497], skip: "wall", hit: "upper", t: 0.6666870386417189050474686, at: [0.1333655459446325401258604, 0.000790696263800228080850004] },
    Ray { pos: [0.8001619956260473, -0.01799902801574595], dir: [-0.999530953795671, 0.030624702518002412], skip: "wall", hit: "upper", t: 0.6360771448556928442817746, at: [0.1643832003408094119513879, 0.001480645323959971662819679] },
    Ray { pos: [0.8004499662510125, -0.029995500202495345], dir: [-0.9987387486953916, 0.05020868305744797], skip: "wall", hit: "upper", t: 0.6304775946662299037373806, at: [0.1707675622735817541529736, 0.001659949522923539357581408] },
    Ray { pos: [0.8008818703536235, -0.041987653089047554], dir: [-0.9977305009626288, 0.06733385069088073], skip: "wall", hit: "upper", t: 0.6434376347264313282054202, at: [0.1589045167198121496727435, 0.001337480536515425933327785] },
    Ray { pos: [0.8014576457404357, -0.053973759826109254], dir: [-0.99682321229614, 0.07964598814507104], skip: "wall", hit: "lower", t: 0.3959065516593103281979414, at: [0.406808805146314230150676, -0.02244139130609586809920936] },
    Ray { pos: [0.05, 4.166666666666668e-05], dir: [0.9999854806408915, -0.0053887389438659825], skip: "upper", hit: "wall", t: 0.7500188897829322195034496, at: [0.8000079999893333385483215, -0.003999989333341748189264434] },
    Ray { pos: [0.095, 0.00028579166666666667], dir: [0.9997948279558347, -0.02025591253838463], skip: "upper", hit: "wall", t: 0.7052426944846038060856007, at: [0.8000979983993437863333112, -0.01399954267114818013192438] },
    Ray { pos: [0.14, 0.0009146666666666669], dir: [0.9992889998642863, -0.037702715422556606], skip: "upper", hit: "wall", t: 0.6607577850511106122420182, at: [0.8002879861762654155170415, -0.02399769606635418364130509] },
    Ray { pos: [0.185, 0.0021105416666666664], dir: [0.9982844805147596, -0.058549944179108304], skip: "upper", hit: "wall", t: 0.6166357950431721109261409, at: [0.8005779443214788399945109, -0.0339934497119511298396815] },
    Ray { pos: [0.22999999999999998, 0.004055666666666666], dir: [0.9964788804953196, -0.08384414545330197], skip: "upper", hit: "wall", t: 0.5729853938857191827100838, at: [0.8009678438394111946845543, -0.04398580404090509707438793] },
    Ray { pos: [0.27499999999999997, 0.006932291666666664], dir: [0.9933743115799407, -0.1149237881949554], skip: "upper", hit: "wall", t: 0.5299690555749482899344256, at: [0.8014576457404355668270115, -0.05397375982610923967428804] },
    Ray { pos: [0.32, 0.010922666666666669], dir: [0.9881494950861223, -0.15349454505304577], skip: "upper", hit: "wall", t: 0.4878283128634875032494034, at: [0.8020473010447700660776268, -0.06395631828030922193311978] },
    Ray { pos: [0.365, 0.016209041666666663], dir: [0.9794485348678976, -0.2016942427168631], skip: "upper", hit: "wall", t: 0.4469216453995870253741507, at: [0.8027367507873755816718659, -0.07393248115597746174081227] },
    Ray { pos: [0.41, 0.02297366666666666], dir: [0.9650436103273412, -0.2620893553091593], skip: "upper", hit: "wall", t: 0.4077804586368580098257596, at: [0.8035259260238524554852378, -0.08390125084514074742465276] },
    Ray { pos: [0.45499999999999996, 0.031398791666666655], dir: [0.9413406609776748, -0.33745778993840764], skip: "upper", hit: "wall", t: 0.3711884149086188457235162, at: [0.8044147478373346122062713, -0.09386163047913654145668471] },
];

fn arc_of(name: &str) -> usize {
    match name {
        "lower" => ARC_CUSP_LOWER,
        "upper" => ARC_CUSP_UPPER,
        "wall" => ARC_WALL,
        _ => unreachable!(),
    }
}

#[test]
fn arclength_at_half_matches_quadrature_oracle() {
    let p = CuspProfile::new(3.0, 0.5, Side::Upper).unwrap();
    let l = arclength_from_s(0.5, &p).unwrap();
    assert!((l - ARCLENGTH_HALF).abs() < 1e-12, "{l} vs {ARCLENGTH_HALF}");
}

#[test]
fn stored_rays_match_intersection_oracle() {
    let t = build_table(&TableConfig::default()).unwrap();
    for (i, ray) in RAYS.iter().enumerate() {
        let skip = t.arc(arc_of(ray.skip)).scatterer();
        let (arc, param, tau) = first_hit(&t, ray.pos, ray.dir, Some(skip)).expect("ray hits the boundary");
        assert_eq!(arc, arc_of(ray.hit), "ray {i} landed on arc {arc}");
        let p = t.point_on_arc(arc, param).pos;
        assert!((tau - ray.t).abs() < 1e-11, "ray {i}: t = {tau} vs {}", ray.t);
        assert!((p[0] - ray.at[0]).abs() < 1e-11 && (p[1] - ray.at[1]).abs() < 1e-11, "ray {i}: {p:?} vs {:?}", ray.at);
    }
}

#[test]
fn reduced_step_matches_root_oracle() {
    let x = ReducedState { s: 0.1, v: 0.3 };
    let y = reduced_step(x, 3.0, 0.5).unwrap().unwrap();
    assert!(((y.s - REDUCED_S1) / REDUCED_S1).abs() < 1e-13, "{} vs {REDUCED_S1}", y.s);
    assert!((y.v - REDUCED_V1).abs() < 1e-13);
    let z = reduced_step_extended(x, 3.0, 0.5).unwrap().unwrap();
    assert!(((z.s - REDUCED_S1) / REDUCED_S1).abs() < 2e-16);
}
