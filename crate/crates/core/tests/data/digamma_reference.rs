// Generated by digamma_reference.py (mpmath, 60 digits). Do not edit.
#[allow(clippy::excessive_precision)]
pub const DIGAMMA_REFERENCE: [(f64, f64); 30] = [
    (0.001, -1000.5755719318102797),
    (0.0025, -400.57311082571915407),
    (0.005, -200.56902091134437867),
    (0.01, -100.56088545786867242),
    (0.03, -33.86225442061876507),
    (0.1, -10.423754940411076232),
    (0.25, -4.2274535333762654081),
    (0.5, -1.9635100260214234794),
    (0.75, -1.0858608797864721696),
    (1.0, -0.57721566490153286061),
    (1.5, 0.036489973978576520559),
    (2.0, 0.42278433509846713939),
    (2.5, 0.70315664064524318723),
    (3.0, 0.92278433509846713939),
    (4.2, 1.311338891286599631),
    (5.999, 1.7059363290792256036),
    (6.0, 1.7061176684318004727),
    (7.5, 1.9467574842460867881),
    (9.99, 2.250700372831201122),
    (10.0, 2.2517525890667211076),
    (12.345, 2.4722024427152781166),
    (25.0, 3.1987425128519740085),
    (50.5, 3.9120396709283919846),
    (100.0, 4.6001618527380874002),
    (333.3, 5.8075420851493453005),
    (1000.0, 6.9072551956488120521),
    (12345.678, 9.4210208207417608775),
    (100000.0, 11.512920464961895087),
    (543210.5, 13.205251264482939154),
    (1000000.0, 13.815510057964190771),
];
