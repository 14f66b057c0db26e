/// `(T, t, ᾱ_t)` for the cosine schedule with `s = 0.008`, evaluated with
/// mpmath at 50 significant digits and rounded to 25.
#[allow(clippy::excessive_precision)]
const COSINE_ORACLE: &[(usize, usize, f64)] = &[
    (10, 0, 1.0),
    (10, 1, 0.9720927371139691743341345),
    (10, 2, 0.8987059205995088890443959),
    (10, 3, 0.7869105111508293159966307),
    (10, 4, 0.6474782111465039123398904),
    (10, 5, 0.4938435904406377133165527),
    (10, 6, 0.3408096397593240443452086),
    (10, 7, 0.2031214741183375484746647),
    (10, 8, 0.09404561267665383482570368),
    (10, 9, 0.02409172414008585526445656),
    (10, 10, 2.554161624384838680690845e-103),
    (50, 0, 1.0),
    (50, 1, 0.9982524864661345528088729),
    (50, 2, 0.9945699782379063214615911),
    (50, 3, 0.9889667787973747526964237),
    (50, 4, 0.9814646519146948708948373),
    (50, 5, 0.9720927371139691743341345),
    (50, 6, 0.9608874364904291893387403),
    (50, 7, 0.9478922733185678081345784),
    (50, 8, 0.9331577230004122335152829),
    (50, 9, 0.9167410170105629049817558),
    (50, 10, 0.8987059205995088890443959),
    (50, 11, 0.8791224851186574894589094),
    (50, 12, 0.858066775929089368609697),
    (50, 13, 0.8356205769508873928488329),
    (50, 14, 0.8118710730006193597704698),
    (50, 15, 0.7869105111508293159966307),
    (50, 16, 0.7608358424268742251884152),
    (50, 17, 0.7337483452328158076691977),
    (50, 18, 0.705753231969044799421362),
    (50, 19, 0.6769592403696010198611813),
    (50, 20, 0.6474782111465039123398904),
    (50, 21, 0.6174246535815940984182518),
    (50, 22, 0.5869153007532003837143285),
    (50, 23, 0.5560686561252067364717105),
    (50, 24, 0.5250045332596436529949523),
    (50, 25, 0.4938435904406377133165527),
    (50, 26, 0.4627068620173182721301067),
    (50, 27, 0.4317152882860243530087681),
    (50, 28, 0.4009892457378284179072033),
    (50, 29, 0.3706480794959747316855687),
    (50, 30, 0.3408096397593240443452086),
    (50, 31, 0.3115898240523363105526222),
    (50, 32, 0.2831021270595695945230464),
    (50, 33, 0.2554571997932137703072821),
    (50, 34, 0.2287624198059265487815768),
    (50, 35, 0.2031214741183375484746647),
    (50, 36, 0.1786339564812002156489437),
    (50, 37, 0.1553949805364932129814936),
    (50, 38, 0.133494810380018699215613),
    (50, 39, 0.1130185099604545779746684),
    (50, 40, 0.09404561267665383482570368),
    (50, 41, 0.07664981245653068878775648),
    (50, 42, 0.06089867751743518398801289),
    (50, 43, 0.04685338791981912671031933),
    (50, 44, 0.03456849793357912292046364),
    (50, 45, 0.02409172414008585526445656),
    (50, 46, 0.01546376009294699952563107),
    (50, 47, 0.008718118257392586820696026),
    (50, 48, 0.003880999842216854762857285),
    (50, 49, 0.0009711930298712445632696902),
    (50, 50, 2.554161624384838680690845e-103),
    (1000, 0, 1.0),
    (1000, 1, 0.9999587157751782221976465),
    (1000, 2, 0.9999125759273680213417911),
    (1000, 37, 0.9952452327341905815891605),
    (1000, 74, 0.9839130851198419454603481),
    (1000, 111, 0.9661540836809957030488984),
    (1000, 148, 0.9422041237525886076190527),
    (1000, 185, 0.9123813360492606855039547),
    (1000, 222, 0.8770818608899510220944234),
    (1000, 259, 0.8367745862098552540351234),
    (1000, 296, 0.7919949192554782633967888),
    (1000, 333, 0.7433376746942400723096733),
    (1000, 370, 0.6914491736068837485587479),
    (1000, 407, 0.637018658312889796927104),
    (1000, 444, 0.5807691370669887238474605),
    (1000, 481, 0.5234477802379665293668508),
    (1000, 500, 0.4938435904406377133165527),
    (1000, 518, 0.4658159955386821983937996),
    (1000, 555, 0.4086393141394245355590893),
    (1000, 592, 0.352677222008799114632264),
    (1000, 629, 0.2986730715538865995054366),
    (1000, 666, 0.2473442075647870829861347),
    (1000, 703, 0.199372438622029534586276),
    (1000, 740, 0.1553949805364932129814936),
    (1000, 777, 0.1159959921214130922792301),
    (1000, 814, 0.08169881572801026663828962),
    (1000, 851, 0.05295902561481310797538799),
    (1000, 888, 0.03015837649016545919436903),
    (1000, 925, 0.01359973261029002710355885),
    (1000, 962, 0.003503044790416623664700012),
    (1000, 990, 0.0002428572279350056303633848),
    (1000, 995, 0.00006071799308549331309226923),
    (1000, 998, 0.000009715044036170092592827145),
    (1000, 999, 0.000002428766907034468355989156),
    (1000, 1000, 2.554161624384838680690845e-103),
];
