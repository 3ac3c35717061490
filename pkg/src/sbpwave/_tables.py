"""Frozen 1D SBP operator coefficient tables.

Generated by tools/derive_tables.py; do not edit by hand.  The
first-derivative boundary closures solve the SBP identity plus the
boundary accuracy conditions exactly; the order-6 free parameter
minimizes the H-weighted truncation residual of x^4 over the
closure rows.  R_GAMMAS are the interior remainder weights of the
compatible variable-coefficient second derivative.
"""

from fractions import Fraction as F

H_LEFT_4 = (F("17/48"), F("59/48"), F("43/48"), F("49/48"))
Q_CORNER_4 = (
    (F("-1/2"), F("59/96"), F("-1/12"), F("-1/32"), F("0"), F("0")),
    (F("-59/96"), F("0"), F("59/96"), F("0"), F("0"), F("0")),
    (F("1/12"), F("-59/96"), F("0"), F("59/96"), F("-1/12"), F("0")),
    (F("1/32"), F("0"), F("-59/96"), F("0"), F("2/3"), F("-1/12")),
)
D1_INTERIOR_4 = (F("1/12"), F("-2/3"), F("0"), F("2/3"), F("-1/12"))
DL_ROW_4 = (F("-11/6"), F("3"), F("-3/2"), F("1/3"))
R_GAMMAS_4 = {3: F("1/18"), 4: F("1/144")}

H_LEFT_6 = (F("13649/43200"), F("12013/8640"), F("2711/4320"), F("5359/4320"), F("7877/8640"), F("43801/43200"))
Q_CORNER_6 = (
    (F("-1/2"), F("5124475092222703052468879/7931626489314500743872000"), F("-14688227387107654735453/247863327791078148246000"), F("-159267246833799759813661/1321937748219083457312000"), F("18306575045382041159483/991453311164312592984000"), F("120512309461734500607719/7931626489314500743872000"), F("0"), F("0"), F("0")),
    (F("-5124475092222703052468879/7931626489314500743872000"), F("0"), F("345639531999877949576339/793162648931450074387200"), F("28465971813079192963909/99145331116431259298400"), F("-21963203401877827569241/528775099287633382924800"), F("-34968740224280558358577/991453311164312592984000"), F("0"), F("0"), F("0")),
    (F("14688227387107654735453/247863327791078148246000"), F("-345639531999877949576339/793162648931450074387200"), F("0"), F("179724104434047613799819/396581324465725037193600"), F("-8637026328486517498841/99145331116431259298400"), F("13808676868217278023299/1321937748219083457312000"), F("0"), F("0"), F("0")),
    (F("159267246833799759813661/1321937748219083457312000"), F("-28465971813079192963909/99145331116431259298400"), F("-179724104434047613799819/396581324465725037193600"), F("0"), F("540747751505546378368499/793162648931450074387200"), F("-9742420893013796487329/123931663895539074123000"), F("1/60"), F("0"), F("0")),
    (F("-18306575045382041159483/991453311164312592984000"), F("21963203401877827569241/528775099287633382924800"), F("8637026328486517498841/99145331116431259298400"), F("-540747751505546378368499/793162648931450074387200"), F("0"), F("5591070156686698065364559/7931626489314500743872000"), F("-3/20"), F("1/60"), F("0")),
    (F("-120512309461734500607719/7931626489314500743872000"), F("34968740224280558358577/991453311164312592984000"), F("-13808676868217278023299/1321937748219083457312000"), F("9742420893013796487329/123931663895539074123000"), F("-5591070156686698065364559/7931626489314500743872000"), F("0"), F("3/4"), F("-3/20"), F("1/60")),
)
D1_INTERIOR_6 = (F("-1/60"), F("3/20"), F("-3/4"), F("0"), F("3/4"), F("-3/20"), F("1/60"))
DL_ROW_6 = (F("-25/12"), F("4"), F("-3"), F("4/3"), F("-1/4"))
R_GAMMAS_6 = {4: F("1/80"), 5: F("1/600"), 6: F("1/3600")}

