package com.shop.inventory;

import com.shop.inventory.model.Item;

public class Pricing {
    private static final double TAX_RATE = 0.2;

    public double grossPrice(Item item) {
        double net = item.getPriceCents() / 100.0;
        return net * (1 + TAX_RATE);
    }

    public String label(Item item) {
        return String.format("%s - %.2f", item.getTitle(), grossPrice(item));
    }
}
